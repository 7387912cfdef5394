#include "dipa/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dipa/io.hpp"

namespace dipa {

namespace {

using json = nlohmann::json;

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError("config: " + path + ": " + message);
}

// Read-only view of one JSON object that remembers its field path.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_.empty() ? "<root>" : path_, "must be an object");
  }

  const std::string& path() const { return path_; }
  bool has(std::string_view key) const { return node_.contains(std::string(key)); }

  void allow_only(std::initializer_list<std::string_view> keys) const {
    for (const auto& item : node_.items()) {
      bool known = false;
      for (auto k : keys) known = known || item.key() == k;
      if (!known) throw ConfigError("config: unknown key '" + join(path_, item.key()) + "'");
    }
  }

  const json& raw(std::string_view key) const { return node_.at(std::string(key)); }

  Section object(std::string_view key) const {
    if (!has(key)) fail(join(path_, key), "required section is missing");
    return Section(raw(key), join(path_, key));
  }

  double number(std::string_view key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number()) fail(join(path_, key), "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(join(path_, key), "must be finite");
    return d;
  }

  std::uint64_t unsigned_integer(std::string_view key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_unsigned()) fail(join(path_, key), "must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  int integer(std::string_view key, int fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer()) fail(join(path_, key), "must be an integer");
    const auto x = v.get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
      fail(join(path_, key), "out of range");
    }
    return static_cast<int>(x);
  }

  bool boolean(std::string_view key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) fail(join(path_, key), "must be true or false");
    return v.get<bool>();
  }

  std::string text(std::string_view key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) fail(join(path_, key), "must be a string");
    return v.get<std::string>();
  }

  std::string required_text(std::string_view key) const {
    if (!has(key)) fail(join(path_, key), "required field is missing");
    return text(key, "");
  }

 private:
  const json& node_;
  std::string path_;
};

// Wraps the std::invalid_argument parsers so errors carry the field path.
template <typename F>
auto with_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (p.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

OperatorSpec parse_operator(const Section& s) {
  OperatorSpec op;
  const std::string modality = s.required_text("modality");
  op.modality = with_path(join(s.path(), "modality"), [&] { return parse_modality(modality); });
  op.seed = s.unsigned_integer("seed", 0);
  switch (op.modality) {
    case Modality::mri:
      s.allow_only({"modality", "seed", "acceleration", "center_fraction"});
      op.acceleration = s.number("acceleration", op.acceleration);
      op.center_fraction = s.number("center_fraction", op.center_fraction);
      break;
    case Modality::spc:
      s.allow_only({"modality", "seed", "gamma", "scale"});
      op.gamma = s.number("gamma", op.gamma);
      if (s.has("scale")) {
        const json& v = s.raw("scale");
        if (v.is_string() && v.get<std::string>() == "orthonormal") {
          op.scale.reset();
        } else if (v.is_number()) {
          op.scale = v.get<double>();
        } else {
          fail(join(s.path(), "scale"), "must be a number or \"orthonormal\"");
        }
      }
      break;
    case Modality::sr:
      s.allow_only({"modality", "seed", "factor", "blur_sigma"});
      op.factor = s.unsigned_integer("factor", op.factor);
      op.blur_sigma = s.number("blur_sigma", op.blur_sigma);
      break;
  }
  return op;
}

Denoiser parse_denoiser(const Section& s) {
  s.allow_only({"kind", "sigma", "preserve_dc"});
  Denoiser d;
  const std::string kind = s.text("kind", std::string(to_string(d.kind)));
  d.kind = with_path(join(s.path(), "kind"), [&] { return parse_denoiser_kind(kind); });
  d.sigma = s.number("sigma", d.kind == DenoiserKind::identity ? 0.0 : d.sigma);
  d.preserve_dc = s.boolean("preserve_dc", d.preserve_dc);
  if (d.sigma < 0.0) fail(join(s.path(), "sigma"), "must be >= 0");
  return d;
}

SolverConfig scheme_switched(SolverConfig c, Scheme scheme) {
  c.scheme = scheme;
  return c;
}

SolverConfig parse_solver(const Section& s, SolverConfig c) {
  s.allow_only({"scheme", "iterations", "alpha", "lambda", "accelerate", "denoiser"});
  const std::string scheme = s.text("scheme", std::string(to_string(c.scheme)));
  c.scheme = with_path(join(s.path(), "scheme"), [&] { return parse_scheme(scheme); });
  c.iterations = s.integer("iterations", c.iterations);
  c.alpha = s.number("alpha", c.alpha);
  c.lambda = s.number("lambda", c.lambda);
  c.accelerate = s.boolean("accelerate", c.accelerate);
  if (s.has("denoiser")) c.denoiser = parse_denoiser(s.object("denoiser"));
  with_path(s.path(), [&] {
    c.validate();
    return 0;
  });
  return c;
}

PreconditionerSpec parse_preconditioner(const Section& s, const std::filesystem::path& base) {
  PreconditionerSpec p;
  p.kind = s.required_text("kind");
  p.label = s.text("label", "");
  if (p.label.find_first_of(",\"\n") != std::string::npos) fail(join(s.path(), "label"), "must not contain , \" or newline");
  const std::string file = s.text("file", "");
  p.file = resolve(base, file);
  if (p.kind == "identity") {
    s.allow_only({"kind", "label"});
  } else if (p.kind == "ridge_hessian") {
    s.allow_only({"kind", "label", "eta"});
    p.eta = s.number("eta", p.eta);
    if (!(p.eta > 0.0)) fail(join(s.path(), "eta"), "must be positive");
  } else if (p.kind == "polynomial") {
    s.allow_only({"kind", "label", "coefficients", "degree", "step"});
    if (s.has("coefficients")) {
      const json& v = s.raw("coefficients");
      if (!v.is_array() || v.empty()) fail(join(s.path(), "coefficients"), "must be a non-empty array of numbers");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) fail(join(s.path(), "coefficients[" + std::to_string(i) + "]"), "must be a number");
        p.coefficients.push_back(v[i].get<double>());
      }
    }
    p.degree = s.unsigned_integer("degree", p.degree);
    p.step = s.number("step", p.step);
    if (!(p.step > 0.0)) fail(join(s.path(), "step"), "must be positive");
  } else if (p.kind == "linear") {
    s.allow_only({"kind", "label", "file"});
  } else if (p.kind == "nonlinear") {
    s.allow_only({"kind", "label", "file", "blocks", "features", "encoding_dims", "kernel_size", "expansion", "seed"});
    auto& n = p.nonlinear;
    n.blocks = s.unsigned_integer("blocks", n.blocks);
    n.features = s.unsigned_integer("features", n.features);
    n.encoding_dims = s.unsigned_integer("encoding_dims", n.encoding_dims);
    n.kernel_size = s.unsigned_integer("kernel_size", n.kernel_size);
    n.expansion = s.unsigned_integer("expansion", n.expansion);
    n.seed = s.unsigned_integer("seed", n.seed);
  } else {
    fail(join(s.path(), "kind"), "unknown preconditioner '" + p.kind +
                                     "' (expected identity, ridge_hessian, polynomial, linear or nonlinear)");
  }
  return p;
}

}  // namespace

SensingOperator OperatorSpec::build(std::size_t height, std::size_t width) const {
  switch (modality) {
    case Modality::mri:
      return SensingOperator::mri(height, width, acceleration, center_fraction, seed);
    case Modality::spc: {
      const double s = scale.value_or(1.0 / std::sqrt(static_cast<double>(height * width)));
      return SensingOperator::spc(height, width, gamma, s, seed);
    }
    case Modality::sr:
      return SensingOperator::sr(height, width, factor, blur_sigma);
  }
  throw std::logic_error("unreachable modality");
}

std::unique_ptr<Preconditioner> build_preconditioner(const PreconditionerSpec& spec, const SensingOperator& op) {
  if (spec.kind == "identity") return std::make_unique<IdentityPreconditioner>();
  if (spec.kind == "ridge_hessian") return std::make_unique<RidgeHessianPreconditioner>(op, spec.eta);
  if (spec.kind == "polynomial") {
    auto coeffs = spec.coefficients.empty() ? neumann_coefficients(spec.degree, spec.step) : spec.coefficients;
    return std::make_unique<PolynomialPreconditioner>(op, std::move(coeffs));
  }

  std::unique_ptr<Preconditioner> po;
  if (spec.kind == "linear") {
    po = std::make_unique<LinearPreconditioner>(op.pixels());
  } else if (spec.kind == "nonlinear") {
    po = std::make_unique<NonlinearPreconditioner>(spec.nonlinear, op.height(), op.width());
  } else {
    throw std::invalid_argument("unknown preconditioner kind '" + spec.kind + "'");
  }
  if (!spec.file.empty()) {
    if (!std::filesystem::exists(spec.file)) {
      throw std::runtime_error("preconditioner file '" + spec.file.string() + "' does not exist");
    }
    const auto values = read_parameters(spec.file);
    if (values.size() != po->parameter_count()) {
      throw std::runtime_error("preconditioner file '" + spec.file.string() + "' holds " +
                               std::to_string(values.size()) + " parameters, " + spec.kind + " expects " +
                               std::to_string(po->parameter_count()));
    }
    po->load_flat_parameters(values);
  }
  return po;
}

TrainingSettings ExperimentConfig::training_settings() const {
  TrainingSettings t;
  t.student = student_solver;
  t.teacher = teacher_solver;
  t.weights = loss;
  t.optimizer = optimizer;
  t.epochs = training.epochs;
  t.batch_size = training.batch_size;
  t.seed = seed;
  t.noise_sigma = training.noise_sigma;
  t.validation_fraction = training.validation_fraction;
  t.workers = training.workers;
  return t;
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("config: malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }

  ExperimentConfig c;
  c.base_dir = base_dir;
  const Section root(doc, "");
  root.allow_only({"$schema", "description", "experiment", "seed", "output_dir", "image", "student_operator",
                   "teacher_operator", "student_solver", "teacher_solver", "preconditioner", "loss", "optimizer",
                   "training", "dataset", "benchmark", "crossval", "linearize", "reconstruct"});
  root.text("$schema", "");
  root.text("description", "");
  c.experiment = root.text("experiment", c.experiment);
  if (c.experiment.empty() || c.experiment.find_first_of(",\"\n/") != std::string::npos) {
    fail("experiment", "must be a non-empty name without , \" / or newline");
  }
  c.seed = root.unsigned_integer("seed", c.seed);
  c.output_dir = resolve(base_dir, root.text("output_dir", "out"));

  if (root.has("image")) {
    const Section s = root.object("image");
    s.allow_only({"height", "width"});
    c.height = s.unsigned_integer("height", c.height);
    c.width = s.unsigned_integer("width", c.width);
  }
  if (c.height == 0 || c.width == 0) fail("image", "height and width must be positive");

  c.student_operator = parse_operator(root.object("student_operator"));
  c.teacher_operator = parse_operator(root.object("teacher_operator"));
  // Build both once so parameter errors surface before any compute.
  for (const auto* which : {"student_operator", "teacher_operator"}) {
    const OperatorSpec& spec = std::string_view(which) == "student_operator" ? c.student_operator : c.teacher_operator;
    with_path(which, [&] { return spec.build(c.height, c.width).pixels(); });
  }

  if (root.has("student_solver")) c.student_solver = parse_solver(root.object("student_solver"), c.student_solver);
  if (root.has("teacher_solver")) c.teacher_solver = parse_solver(root.object("teacher_solver"), c.teacher_solver);

  if (root.has("preconditioner")) c.preconditioner = parse_preconditioner(root.object("preconditioner"), base_dir);

  if (root.has("loss")) {
    const Section s = root.object("loss");
    s.allow_only({"beta_imitation", "beta_supervised", "tau", "cosine_eps"});
    c.loss.beta_imitation = s.number("beta_imitation", c.loss.beta_imitation);
    c.loss.beta_supervised = s.number("beta_supervised", c.loss.beta_supervised);
    c.loss.tau = s.number("tau", c.loss.tau);
    c.loss.cosine_eps = s.number("cosine_eps", c.loss.cosine_eps);
    with_path("loss", [&] {
      c.loss.validate();
      return 0;
    });
  }

  // MRI runs default to decoupled weight decay.
  if (c.student_operator.modality == Modality::mri) {
    c.optimizer.kind = OptimizerKind::adamw;
    c.optimizer.weight_decay = 0.01;
  }
  if (root.has("optimizer")) {
    const Section s = root.object("optimizer");
    s.allow_only({"kind", "lr", "beta1", "beta2", "eps", "weight_decay"});
    const std::string kind = s.text("kind", std::string(to_string(c.optimizer.kind)));
    c.optimizer.kind = with_path("optimizer.kind", [&] { return parse_optimizer_kind(kind); });
    c.optimizer.lr = s.number("lr", c.optimizer.lr);
    c.optimizer.beta1 = s.number("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = s.number("beta2", c.optimizer.beta2);
    c.optimizer.eps = s.number("eps", c.optimizer.eps);
    c.optimizer.weight_decay = s.number("weight_decay", c.optimizer.weight_decay);
    with_path("optimizer", [&] {
      c.optimizer.validate();
      return 0;
    });
  }

  if (root.has("training")) {
    const Section s = root.object("training");
    s.allow_only({"epochs", "batch_size", "validation_fraction", "workers", "noise_sigma"});
    c.training.epochs = s.integer("epochs", c.training.epochs);
    c.training.batch_size = s.unsigned_integer("batch_size", c.training.batch_size);
    c.training.validation_fraction = s.number("validation_fraction", c.training.validation_fraction);
    c.training.workers = s.unsigned_integer("workers", c.training.workers);
    c.training.noise_sigma = s.number("noise_sigma", c.training.noise_sigma);
  }
  with_path("training", [&] {
    c.training_settings().validate();
    return 0;
  });

  if (root.has("dataset")) {
    const Section s = root.object("dataset");
    const std::string source = s.text("source", "synthetic");
    if (source == "synthetic") {
      s.allow_only({"source", "count", "seed", "rectangles", "bumps"});
      c.dataset.source = DatasetSpec::Source::synthetic;
      c.dataset.count = s.unsigned_integer("count", c.dataset.count);
      if (s.has("seed")) c.dataset.seed = s.unsigned_integer("seed", 0);
      c.dataset.rectangles = s.unsigned_integer("rectangles", c.dataset.rectangles);
      c.dataset.bumps = s.unsigned_integer("bumps", c.dataset.bumps);
      if (c.dataset.count == 0) fail("dataset.count", "must be positive");
    } else if (source == "directory") {
      s.allow_only({"source", "path"});
      c.dataset.source = DatasetSpec::Source::directory;
      c.dataset.directory = resolve(base_dir, s.required_text("path"));
    } else {
      fail("dataset.source", "unknown source '" + source + "' (expected synthetic or directory)");
    }
  }

  if (root.has("benchmark")) {
    const json& list = root.raw("benchmark");
    if (!list.is_array() || list.empty()) fail("benchmark", "must be a non-empty array of preconditioners");
    for (std::size_t i = 0; i < list.size(); ++i) {
      c.benchmark.push_back(parse_preconditioner(Section(list[i], "benchmark[" + std::to_string(i) + "]"), base_dir));
    }
  }

  if (root.has("crossval")) {
    const Section s = root.object("crossval");
    s.allow_only({"pnp_solver", "red_solver"});
    if (s.has("pnp_solver")) c.crossval.pnp_solver = parse_solver(s.object("pnp_solver"), scheme_switched(c.student_solver, Scheme::pnp));
    if (s.has("red_solver")) c.crossval.red_solver = parse_solver(s.object("red_solver"), scheme_switched(c.student_solver, Scheme::red));
    if (c.crossval.pnp_solver && c.crossval.pnp_solver->scheme != Scheme::pnp) {
      fail("crossval.pnp_solver.scheme", "must be pnp");
    }
    if (c.crossval.red_solver && c.crossval.red_solver->scheme != Scheme::red) {
      fail("crossval.red_solver.scheme", "must be red");
    }
  }

  if (root.has("linearize")) {
    const Section s = root.object("linearize");
    s.allow_only({"iteration", "eps", "reference"});
    c.linearize.iteration = s.integer("iteration", c.linearize.iteration);
    c.linearize.eps = s.number("eps", c.linearize.eps);
    c.linearize.reference = s.text("reference", c.linearize.reference);
    if (c.linearize.iteration < 1) fail("linearize.iteration", "must be >= 1");
    if (!(c.linearize.eps > 0.0)) fail("linearize.eps", "must be positive");
    if (c.linearize.reference != "zeros" && c.linearize.reference != "gradient") {
      fail("linearize.reference", "must be \"zeros\" or \"gradient\"");
    }
  }

  if (root.has("reconstruct")) {
    const Section s = root.object("reconstruct");
    s.allow_only({"image", "index"});
    c.reconstruct.image = resolve(base_dir, s.text("image", ""));
    c.reconstruct.index = s.unsigned_integer("index", 0);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

}  // namespace dipa
