#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dipa/config.hpp"
#include "dipa/metrics.hpp"
#include "dipa/tensor.hpp"

namespace dipa {

// Piecewise-smooth test images: a flat background, axis-aligned rectangles
// of random intensity, then Gaussian bumps, clipped to [0, 1].
std::vector<Tensor> synthetic_images(std::size_t count, std::size_t height, std::size_t width, std::size_t rectangles,
                                     std::size_t bumps, std::uint64_t seed);

// Every *.pgm in the directory, sorted by file name.
std::vector<Tensor> load_pgm_directory(const std::filesystem::path& directory);

// Synthetic or directory dataset; images must match the configured shape.
std::vector<Tensor> load_dataset(const ExperimentConfig& config);

// Indices of the held-out split: the last validation_fraction of the data,
// or everything when the fraction rounds to zero images.
std::vector<std::size_t> held_out_indices(std::size_t count, double validation_fraction);

// Student measurement of dataset image `index`; the same draw the training
// session uses.
Tensor student_measurement(const ExperimentConfig& config, const SensingOperator& op, const Tensor& image,
                           std::size_t index);

struct Evaluation {
  MetricsRecord metrics;
  // Mean data fidelity and PSNR over images, per iteration.
  std::vector<double> mean_fidelity;
  std::vector<double> mean_psnr;
};

// Reconstructs the held-out images with one preconditioner and solver.
Evaluation evaluate_preconditioner(const ExperimentConfig& config, const Preconditioner& po,
                                   const SolverConfig& solver, const std::vector<Tensor>& images);

struct TrainOutcome {
  std::vector<EpochRecord> history;
  std::vector<double> parameters;
  double student_psnr = 0.0;
  double baseline_psnr = 0.0;
  double teacher_psnr = 0.0;
};

TrainOutcome run_training(const ExperimentConfig& config);

struct BenchmarkRow {
  std::string name;
  Evaluation evaluation;
};

std::vector<BenchmarkRow> run_benchmark(const ExperimentConfig& config);

struct CrossvalOutcome {
  double trained_pnp = 0.0;
  double trained_red = 0.0;
  double identity_pnp = 0.0;
  double identity_red = 0.0;
};

CrossvalOutcome run_crossval(const ExperimentConfig& config);

// Command entry points. Exit codes: 0 success, 1 usage or configuration
// error, 2 runtime failure. Diagnostics go to `err`, progress to `out`.
struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

int cmd_train(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_reconstruct(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_benchmark(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_crossval(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_linearize(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_gen_data(const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace dipa
