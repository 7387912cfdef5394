#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "dipa/operators.hpp"
#include "dipa/preconditioners.hpp"
#include "dipa/solvers.hpp"

namespace dipa {

// ---------------------------------------------------------------------------
// Losses

struct LossWeights {
  double beta_imitation = 1.0;
  double beta_supervised = 0.0;
  double tau = 1e-3;  // convergence regularizer, linear preconditioners only
  double cosine_eps = 1e-12;

  void validate() const;
};

struct AlignmentLoss {
  Var value;
  // Both gradients vanished; value is a constant zero.
  bool degenerate = false;
};

// (1 - cos(P(grad g_s(x_s), k), grad g_t(x_t)))^2 with the cosine
// denominator stabilized by cosine_eps. grad g(x) = A^T (A x - y).
AlignmentLoss gradient_alignment_loss(const Preconditioner& po, std::span<const Var> params,
                                      const SensingOperator& student_op, Var student_output,
                                      Var student_measurement, const SensingOperator& teacher_op,
                                      const Tensor& teacher_output, const Tensor& teacher_measurement,
                                      int final_iteration, double cosine_eps);

// ||x_s - x_t||^2
Var imitation_loss(Var student_output, Var teacher_output);
// ||x_s - x||^2
Var supervised_loss(Var student_output, Var truth);

// alpha ||P vec(A_s^T A_s x) - A_t^T A_t x||. Defined for the dense linear
// preconditioner only; throws std::invalid_argument otherwise.
Var convergence_regularizer(const Preconditioner& po, std::span<const Var> params,
                            const SensingOperator& student_op, const SensingOperator& teacher_op,
                            const Tensor& truth, double alpha);
// Same with the Gram actions supplied directly: student_gram_x = A_s^T A_s x
// and teacher_gram_x = A_t^T A_t x, e.g. from explicit matrices.
Var convergence_regularizer(const Preconditioner& po, std::span<const Var> params, const Tensor& student_gram_x,
                            const Tensor& teacher_gram_x, double alpha);

struct LossTerms {
  Var alignment;
  Var imitation;
  Var supervised;
  std::optional<Var> convergence;
};

struct LossValues {
  double alignment = 0.0;
  double imitation = 0.0;
  double supervised = 0.0;
  double convergence = 0.0;
};

// L_G + beta_I L_I + beta_S L_S + tau R_C (R_C only when present).
Var total_loss(const LossTerms& terms, const LossWeights& weights);
double total_loss(const LossValues& values, const LossWeights& weights);

// ---------------------------------------------------------------------------
// Optimizer

enum class OptimizerKind { adam, adamw };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // AdamW: decoupled decay p <- p (1 - lr wd). Adam: L2 term wd p added to
  // the gradient.
  double weight_decay = 0.0;

  void validate() const;
};

// Bias-corrected adaptive-moment optimizer.
class AdamOptimizer {
 public:
  AdamOptimizer(OptimizerSettings settings, std::span<const Tensor> params);

  // Throws on shape mismatch or non-finite gradients; params are untouched
  // in that case.
  void step(std::span<Tensor> params, std::span<const Tensor> grads);

  std::size_t step_count() const { return steps_; }
  const OptimizerSettings& settings() const { return settings_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  OptimizerSettings settings_;
  std::size_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

// ---------------------------------------------------------------------------
// Training

struct TrainingSettings {
  SolverConfig student;
  SolverConfig teacher;
  LossWeights weights;
  OptimizerSettings optimizer;
  int epochs = 50;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  double validation_fraction = 0.2;
  // Samples of a batch processed concurrently; results do not depend on it.
  std::size_t workers = 1;

  void validate() const;
};

struct Sample {
  Tensor truth;
  Tensor student_measurement;
  Tensor teacher_measurement;
};

struct EpochRecord {
  int epoch = 0;
  double alignment = 0.0;
  double imitation = 0.0;
  double supervised = 0.0;
  double convergence = 0.0;
  double validation_psnr = 0.0;  // NaN without a validation split
};

struct SampleObjective {
  Var total;
  LossValues values;
  bool degenerate = false;
};

// Student solve on the tape plus every loss term for one sample.
SampleObjective sample_objective(const Preconditioner& po, std::span<const Var> params,
                                 const SensingOperator& student_op, const SensingOperator& teacher_op,
                                 const Sample& sample, const Tensor& teacher_output, const TrainingSettings& settings,
                                 Tape& tape);

// Raised when a solve diverges or a loss turns non-finite during training.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(int epoch, std::size_t batch, std::size_t sample, const std::string& what);
  int epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }
  std::size_t sample() const { return sample_; }

 private:
  int epoch_;
  std::size_t batch_;
  std::size_t sample_;
};

// Teacher-guided training of a learnable preconditioner. The last
// validation_fraction of the images (by index) is held out. Teacher
// reconstructions are computed once at construction.
class DistillSession {
 public:
  DistillSession(SensingOperator student_op, SensingOperator teacher_op, std::unique_ptr<Preconditioner> po,
                 TrainingSettings settings, std::vector<Tensor> images);

  EpochRecord run_epoch();
  // Runs the remaining epochs.
  const std::vector<EpochRecord>& train();

  const std::vector<EpochRecord>& history() const { return history_; }
  const Preconditioner& preconditioner() const { return *po_; }
  std::unique_ptr<Preconditioner> release_preconditioner() { return std::move(po_); }
  const AdamOptimizer& optimizer() const { return optimizer_; }
  const TrainingSettings& settings() const { return settings_; }
  const SensingOperator& student_operator() const { return student_op_; }
  const SensingOperator& teacher_operator() const { return teacher_op_; }

  std::span<const Sample> samples() const { return samples_; }
  std::size_t training_count() const { return training_count_; }
  const std::vector<Tensor>& teacher_outputs() const { return teacher_outputs_; }

  // Mean student PSNR on the held-out split with the given preconditioner.
  double validation_psnr(const Preconditioner& po) const;
  double teacher_validation_psnr() const;

 private:
  SensingOperator student_op_;
  SensingOperator teacher_op_;
  std::unique_ptr<Preconditioner> po_;
  TrainingSettings settings_;
  std::vector<Sample> samples_;
  std::vector<Tensor> teacher_outputs_;
  std::size_t training_count_ = 0;
  AdamOptimizer optimizer_;
  std::vector<EpochRecord> history_;
};

}  // namespace dipa
