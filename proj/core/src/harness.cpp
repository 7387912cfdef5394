#include "dipa/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <ostream>

#include "dipa/distillation.hpp"
#include "dipa/io.hpp"
#include "dipa/random.hpp"

namespace dipa {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

ExperimentConfig prepare(const CommandOptions& options) {
  ExperimentConfig config = load_config(options.config);
  if (options.seed) config.seed = *options.seed;
  if (options.out) config.output_dir = *options.out;
  std::filesystem::create_directories(config.output_dir);
  return config;
}

template <typename Body>
int run_command(const char* name, const CommandOptions& options, std::ostream& err, Body&& body) {
  try {
    const ExperimentConfig config = prepare(options);
    body(config);
    return 0;
  } catch (const ConfigError& e) {
    err << name << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << name << ": " << e.what() << '\n';
    return 2;
  }
}

SolverConfig with_scheme(SolverConfig solver, Scheme scheme) {
  solver.scheme = scheme;
  return solver;
}

std::vector<Tensor> held_out(const ExperimentConfig& config, const std::vector<Tensor>& images,
                             std::vector<std::size_t>& indices) {
  indices = held_out_indices(images.size(), config.training.validation_fraction);
  std::vector<Tensor> out;
  for (auto i : indices) out.push_back(images[i]);
  return out;
}

Evaluation evaluate_indexed(const ExperimentConfig& config, const Preconditioner& po, const SolverConfig& solver,
                            const std::vector<Tensor>& images, const std::vector<std::size_t>& indices) {
  const SensingOperator op = config.student_operator.build(config.height, config.width);
  SolverConfig traced = solver;
  traced.record_trajectory = true;

  Evaluation ev;
  ev.metrics.experiment = config.experiment;
  const auto start = Clock::now();
  const auto iterations = static_cast<std::size_t>(solver.iterations);
  ev.mean_fidelity.assign(iterations, 0.0);
  ev.mean_psnr.assign(iterations, 0.0);
  for (std::size_t j = 0; j < images.size(); ++j) {
    const Tensor y = student_measurement(config, op, images[j], indices[j]);
    const SolverRun run = solve(po, op, y, traced, &images[j]);
    ev.metrics.per_image_psnr.push_back(psnr(images[j], run.final));
    for (std::size_t k = 0; k < iterations; ++k) {
      ev.mean_fidelity[k] += run.trajectory[k].data_fidelity;
      ev.mean_psnr[k] += *run.trajectory[k].psnr;
    }
  }
  const double inv = images.empty() ? 0.0 : 1.0 / static_cast<double>(images.size());
  for (std::size_t k = 0; k < iterations; ++k) {
    ev.mean_fidelity[k] *= inv;
    ev.mean_psnr[k] *= inv;
  }
  ev.metrics.fidelity_trace = ev.mean_fidelity;
  summarize(ev.metrics);
  ev.metrics.wall_seconds = seconds_since(start);
  return ev;
}

}  // namespace

std::vector<Tensor> synthetic_images(std::size_t count, std::size_t height, std::size_t width, std::size_t rectangles,
                                     std::size_t bumps, std::uint64_t seed) {
  if (height == 0 || width == 0) throw std::invalid_argument("synthetic_images: empty shape");
  std::vector<Tensor> out;
  out.reserve(count);
  const double h = static_cast<double>(height);
  const double w = static_cast<double>(width);
  for (std::size_t n = 0; n < count; ++n) {
    Rng rng(derive_seed(seed, n, 0));
    Tensor img({height, width}, rng.uniform(0.0, 0.3));
    for (std::size_t r = 0; r < rectangles; ++r) {
      const std::size_t y0 = rng.below(height);
      const std::size_t x0 = rng.below(width);
      const std::size_t y1 = std::min(height, y0 + 1 + rng.below(std::max<std::size_t>(1, height / 2)));
      const std::size_t x1 = std::min(width, x0 + 1 + rng.below(std::max<std::size_t>(1, width / 2)));
      const double level = rng.uniform(0.2, 0.9);
      for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) img.at(y, x) = level;
      }
    }
    for (std::size_t b = 0; b < bumps; ++b) {
      const double cy = rng.uniform(0.0, h);
      const double cx = rng.uniform(0.0, w);
      const double sigma = rng.uniform(0.1, 0.3) * std::min(h, w);
      const double amp = rng.uniform(-0.3, 0.4);
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const double dy = static_cast<double>(y) - cy;
          const double dx = static_cast<double>(x) - cx;
          img.at(y, x) += amp * std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
        }
      }
    }
    for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<Tensor> load_pgm_directory(const std::filesystem::path& directory) {
  if (!std::filesystem::is_directory(directory)) {
    throw std::runtime_error("dataset directory '" + directory.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Tensor> out;
  for (const auto& f : files) {
    try {
      out.push_back(read_pgm(f));
    } catch (const std::exception& e) {
      throw std::runtime_error(f.string() + ": " + e.what());
    }
  }
  if (out.empty()) throw std::runtime_error("dataset directory '" + directory.string() + "' has no .pgm files");
  return out;
}

std::vector<Tensor> load_dataset(const ExperimentConfig& config) {
  std::vector<Tensor> images;
  if (config.dataset.source == DatasetSpec::Source::synthetic) {
    images = synthetic_images(config.dataset.count, config.height, config.width, config.dataset.rectangles,
                              config.dataset.bumps, config.dataset_seed());
  } else {
    images = load_pgm_directory(config.dataset.directory);
  }
  if (images.empty()) throw std::runtime_error("empty dataset");
  const Shape expected{config.height, config.width};
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != expected) {
      throw std::runtime_error("dataset image " + std::to_string(i) + " has shape " +
                               shape_string(images[i].shape()) + ", config expects " + shape_string(expected));
    }
  }
  return images;
}

std::vector<std::size_t> held_out_indices(std::size_t count, double validation_fraction) {
  const auto held = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(count)));
  std::vector<std::size_t> out;
  for (std::size_t i = held == 0 ? 0 : count - held; i < count; ++i) out.push_back(i);
  return out;
}

Tensor student_measurement(const ExperimentConfig& config, const SensingOperator& op, const Tensor& image,
                           std::size_t index) {
  return simulate_measurement(op, image, config.training.noise_sigma, derive_seed(config.seed, index, 1)).values;
}

Evaluation evaluate_preconditioner(const ExperimentConfig& config, const Preconditioner& po,
                                   const SolverConfig& solver, const std::vector<Tensor>& images) {
  std::vector<std::size_t> indices;
  const auto subset = held_out(config, images, indices);
  return evaluate_indexed(config, po, solver, subset, indices);
}

TrainOutcome run_training(const ExperimentConfig& config) {
  SensingOperator student = config.student_operator.build(config.height, config.width);
  SensingOperator teacher = config.teacher_operator.build(config.height, config.width);
  auto po = build_preconditioner(config.preconditioner, student);
  if (!po->learnable()) {
    throw ConfigError("config: preconditioner.kind: '" + config.preconditioner.kind +
                      "' has no trainable parameters (use linear or nonlinear)");
  }
  DistillSession session(std::move(student), std::move(teacher), std::move(po), config.training_settings(),
                         load_dataset(config));
  TrainOutcome out;
  out.history = session.train();
  out.parameters = session.preconditioner().flat_parameters();
  out.student_psnr = session.validation_psnr(session.preconditioner());
  out.baseline_psnr = session.validation_psnr(IdentityPreconditioner{});
  out.teacher_psnr = session.teacher_validation_psnr();
  return out;
}

std::vector<BenchmarkRow> run_benchmark(const ExperimentConfig& config) {
  const SensingOperator op = config.student_operator.build(config.height, config.width);
  const auto images = load_dataset(config);
  std::vector<PreconditionerSpec> variants = config.benchmark;
  if (variants.empty()) variants.push_back(PreconditionerSpec{});
  std::vector<BenchmarkRow> rows;
  for (const auto& spec : variants) {
    const auto po = build_preconditioner(spec, op);
    rows.push_back({spec.name(), evaluate_preconditioner(config, *po, config.student_solver, images)});
  }
  return rows;
}

CrossvalOutcome run_crossval(const ExperimentConfig& config) {
  if (config.preconditioner.file.empty()) {
    throw ConfigError("config: preconditioner.file: crossval needs a trained preconditioner file");
  }
  const SensingOperator op = config.student_operator.build(config.height, config.width);
  const auto images = load_dataset(config);
  const auto trained = build_preconditioner(config.preconditioner, op);
  const IdentityPreconditioner identity;
  const SolverConfig pnp = config.crossval.pnp_solver.value_or(with_scheme(config.student_solver, Scheme::pnp));
  const SolverConfig red = config.crossval.red_solver.value_or(with_scheme(config.student_solver, Scheme::red));

  CrossvalOutcome out;
  out.trained_pnp = evaluate_preconditioner(config, *trained, pnp, images).metrics.mean_psnr;
  out.trained_red = evaluate_preconditioner(config, *trained, red, images).metrics.mean_psnr;
  out.identity_pnp = evaluate_preconditioner(config, identity, pnp, images).metrics.mean_psnr;
  out.identity_red = evaluate_preconditioner(config, identity, red, images).metrics.mean_psnr;
  return out;
}

// ---------------------------------------------------------------------------

int cmd_train(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return run_command("train", options, err, [&](const ExperimentConfig& config) {
    const TrainOutcome result = run_training(config);

    CsvTable history({"epoch", "alignment", "imitation", "supervised", "convergence", "validation_psnr"});
    for (const auto& r : result.history) {
      history.add_row({std::to_string(r.epoch), format_double(r.alignment), format_double(r.imitation),
                       format_double(r.supervised), format_double(r.convergence), format_double(r.validation_psnr)});
    }
    CsvTable summary({"experiment", "student_psnr", "baseline_psnr", "teacher_psnr"});
    summary.add_row({config.experiment, format_double(result.student_psnr), format_double(result.baseline_psnr),
                     format_double(result.teacher_psnr)});

    write_parameters(config.output_dir / "po.bin", result.parameters);
    history.write(config.output_dir / "history.csv");
    summary.write(config.output_dir / "summary.csv");
    out << config.experiment << ": validation PSNR student " << format_double(result.student_psnr)
        << " dB, baseline " << format_double(result.baseline_psnr) << " dB, teacher "
        << format_double(result.teacher_psnr) << " dB\n";
  });
}

int cmd_reconstruct(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return run_command("reconstruct", options, err, [&](const ExperimentConfig& config) {
    const SensingOperator op = config.student_operator.build(config.height, config.width);
    Tensor truth;
    std::size_t index = 0;
    if (!config.reconstruct.image.empty()) {
      truth = read_pgm(config.reconstruct.image);
      if (truth.shape() != op.image_shape()) {
        throw std::runtime_error(config.reconstruct.image.string() + ": shape " + shape_string(truth.shape()) +
                                 " does not match the configured " + shape_string(op.image_shape()));
      }
    } else {
      auto images = load_dataset(config);
      index = config.reconstruct.index;
      if (index >= images.size()) {
        throw ConfigError("config: reconstruct.index: " + std::to_string(index) + " is out of range for " +
                          std::to_string(images.size()) + " images");
      }
      truth = std::move(images[index]);
    }
    const auto po = build_preconditioner(config.preconditioner, op);
    SolverConfig solver = config.student_solver;
    solver.record_trajectory = true;
    const SolverRun run = solve(*po, op, student_measurement(config, op, truth, index), solver, &truth);

    CsvTable trajectory({"iteration", "data_fidelity", "psnr"});
    for (const auto& rec : run.trajectory) {
      trajectory.add_row({std::to_string(rec.iteration), format_double(rec.data_fidelity), format_double(*rec.psnr)});
    }
    write_pgm(config.output_dir / "reconstruction.pgm", run.final);
    trajectory.write(config.output_dir / "trajectory.csv");
    out << config.experiment << ": reconstruction PSNR " << format_double(psnr(truth, run.final)) << " dB\n";
  });
}

int cmd_benchmark(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return run_command("benchmark", options, err, [&](const ExperimentConfig& config) {
    const auto rows = run_benchmark(config);
    CsvTable table({"po_kind", "mean_psnr", "std_psnr", "wall_s"});
    CsvTable convergence({"po_kind", "iteration", "mean_data_fidelity", "mean_psnr"});
    for (const auto& row : rows) {
      const auto& m = row.evaluation.metrics;
      table.add_row({row.name, format_double(m.mean_psnr), format_double(m.std_psnr), format_double(m.wall_seconds)});
      for (std::size_t k = 0; k < row.evaluation.mean_fidelity.size(); ++k) {
        convergence.add_row({row.name, std::to_string(k + 1), format_double(row.evaluation.mean_fidelity[k]),
                             format_double(row.evaluation.mean_psnr[k])});
      }
      out << row.name << ": " << format_double(m.mean_psnr) << " dB\n";
    }
    table.write(config.output_dir / "benchmark.csv");
    convergence.write(config.output_dir / "convergence.csv");
  });
}

int cmd_crossval(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return run_command("crossval", options, err, [&](const ExperimentConfig& config) {
    const CrossvalOutcome r = run_crossval(config);
    CsvTable table({"po", "pnp_psnr", "red_psnr"});
    table.add_row({config.preconditioner.name(), format_double(r.trained_pnp), format_double(r.trained_red)});
    table.add_row({"identity", format_double(r.identity_pnp), format_double(r.identity_red)});
    table.write(config.output_dir / "crossval.csv");
    out << config.preconditioner.name() << ": pnp " << format_double(r.trained_pnp) << " dB, red "
        << format_double(r.trained_red) << " dB (identity " << format_double(r.identity_pnp) << " / "
        << format_double(r.identity_red) << ")\n";
  });
}

int cmd_linearize(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return run_command("linearize", options, err, [&](const ExperimentConfig& config) {
    const SensingOperator op = config.student_operator.build(config.height, config.width);
    if (op.pixels() > RidgeHessianPreconditioner::kMaxPixels) {
      throw ConfigError("config: image: n = " + std::to_string(op.pixels()) + " exceeds " +
                        std::to_string(RidgeHessianPreconditioner::kMaxPixels) +
                        " pixels; linearize a smaller image shape");
    }
    const auto po = build_preconditioner(config.preconditioner, op);
    Tensor reference(op.image_shape());
    if (config.linearize.reference == "gradient") {
      const auto images = load_dataset(config);
      const auto idx = held_out_indices(images.size(), config.training.validation_fraction);
      const Tensor y = student_measurement(config, op, images[idx.front()], idx.front());
      reference = op.data_grad(Tensor(op.image_shape()), y);
    }
    const Tensor jac = linearize(*po, reference, config.linearize.iteration, config.linearize.eps);
    const Tensor logmag = log_magnitude(jac);

    const std::size_t n = jac.shape()[0];
    double deviation = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) deviation = std::max(deviation, std::abs(jac.at(i, j) - (i == j ? 1.0 : 0.0)));
    }
    CsvTable summary({"rows", "cols", "max_abs_entry", "max_identity_deviation", "max_log_magnitude"});
    summary.add_row({std::to_string(n), std::to_string(jac.shape()[1]), format_double(max_abs(jac)),
                     format_double(deviation), format_double(max_abs(logmag))});

    write_matrix(config.output_dir / "linearized.dipamat", jac);
    write_matrix(config.output_dir / "log_magnitude.dipamat", logmag);
    summary.write(config.output_dir / "linearize.csv");
    out << config.preconditioner.name() << ": " << n << "x" << n << " linearization, max |P - I| "
        << format_double(deviation) << '\n';
  });
}

int cmd_gen_data(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return run_command("gen-data", options, err, [&](const ExperimentConfig& config) {
    if (config.dataset.source != DatasetSpec::Source::synthetic) {
      throw ConfigError("config: dataset.source: gen-data needs a synthetic dataset");
    }
    const auto images = load_dataset(config);
    CsvTable manifest({"index", "file", "mean", "min", "max"});
    for (std::size_t i = 0; i < images.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "image_%04zu.pgm", i);
      write_pgm(config.output_dir / name, images[i]);
      const auto d = images[i].data();
      double s = 0.0;
      for (double v : d) s += v;
      manifest.add_row({std::to_string(i), name, format_double(s / static_cast<double>(d.size())),
                        format_double(*std::min_element(d.begin(), d.end())),
                        format_double(*std::max_element(d.begin(), d.end()))});
    }
    manifest.write(config.output_dir / "manifest.csv");
    out << "wrote " << images.size() << " images to " << config.output_dir.string() << '\n';
  });
}

}  // namespace dipa
