#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dipa/distillation.hpp"
#include "dipa/operators.hpp"
#include "dipa/preconditioners.hpp"
#include "dipa/solvers.hpp"

namespace dipa {

// Invalid or unreadable configuration. The message names the field path,
// e.g. "student_operator.modality".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OperatorSpec {
  Modality modality = Modality::spc;
  // MRI
  double acceleration = 4.0;
  double center_fraction = 0.08;
  // SPC; nullopt means orthonormal rows (1/sqrt(n))
  double gamma = 0.25;
  std::optional<double> scale;
  // SR
  std::size_t factor = 2;
  double blur_sigma = 1.0;
  std::uint64_t seed = 0;

  SensingOperator build(std::size_t height, std::size_t width) const;
};

struct PreconditionerSpec {
  std::string kind = "identity";  // identity | ridge_hessian | polynomial | linear | nonlinear
  std::string label;              // defaults to kind
  double eta = 1e-2;              // ridge_hessian
  std::vector<double> coefficients;  // polynomial; empty means Neumann(degree, step)
  std::size_t degree = 3;
  double step = 1.0;
  NonlinearConfig nonlinear;
  std::filesystem::path file;  // learned parameters (linear, nonlinear)

  std::string name() const { return label.empty() ? kind : label; }
};

// Builds the operator for the student operator's image shape, loading
// learned parameters from spec.file when set.
std::unique_ptr<Preconditioner> build_preconditioner(const PreconditionerSpec& spec, const SensingOperator& op);

struct DatasetSpec {
  enum class Source { synthetic, directory };
  Source source = Source::synthetic;
  std::size_t count = 50;
  std::optional<std::uint64_t> seed;  // defaults to the experiment seed
  std::size_t rectangles = 2;
  std::size_t bumps = 4;
  std::filesystem::path directory;
};

struct TrainingSpec {
  int epochs = 50;
  std::size_t batch_size = 8;
  double validation_fraction = 0.2;
  std::size_t workers = 1;
  double noise_sigma = 0.0;
};

struct CrossvalSpec {
  // Default: the student solver with the scheme switched.
  std::optional<SolverConfig> pnp_solver;
  std::optional<SolverConfig> red_solver;
};

struct LinearizeSpec {
  int iteration = 1;
  double eps = 1e-5;
  std::string reference = "zeros";  // zeros | gradient
};

struct ReconstructSpec {
  std::filesystem::path image;  // PGM; empty means dataset image `index`
  std::size_t index = 0;
};

inline SolverConfig teacher_solver_defaults() {
  SolverConfig c;
  c.alpha = 0.7;
  return c;
}

struct ExperimentConfig {
  std::string experiment = "experiment";
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::size_t height = 16;
  std::size_t width = 16;

  OperatorSpec student_operator;
  OperatorSpec teacher_operator;
  SolverConfig student_solver;  // alpha 0.4
  SolverConfig teacher_solver = teacher_solver_defaults();
  PreconditionerSpec preconditioner;
  LossWeights loss;
  OptimizerSettings optimizer;
  TrainingSpec training;
  DatasetSpec dataset;

  std::vector<PreconditionerSpec> benchmark;
  CrossvalSpec crossval;
  LinearizeSpec linearize;
  ReconstructSpec reconstruct;

  // Directory that relative paths in the document resolve against.
  std::filesystem::path base_dir;

  TrainingSettings training_settings() const;
  std::uint64_t dataset_seed() const { return dataset.seed.value_or(seed); }
};

// Parses and validates a JSON document. Unknown keys are rejected.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace dipa
