#include "dipa/distillation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "dipa/autodiff.hpp"
#include "dipa/metrics.hpp"
#include "dipa/random.hpp"

namespace dipa {

namespace {

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

void LossWeights::validate() const {
  require(beta_imitation >= 0.0 && std::isfinite(beta_imitation), "loss: beta_imitation must be >= 0");
  require(beta_supervised >= 0.0 && std::isfinite(beta_supervised), "loss: beta_supervised must be >= 0");
  require(tau >= 0.0 && std::isfinite(tau), "loss: tau must be >= 0");
  require(cosine_eps > 0.0, "loss: cosine_eps must be positive");
}

AlignmentLoss gradient_alignment_loss(const Preconditioner& po, std::span<const Var> params,
                                      const SensingOperator& student_op, Var student_output,
                                      Var student_measurement, const SensingOperator& teacher_op,
                                      const Tensor& teacher_output, const Tensor& teacher_measurement,
                                      int final_iteration, double cosine_eps) {
  Tape& tape = student_output.tape();
  const Tensor teacher_grad = teacher_op.data_grad(teacher_output, teacher_measurement);
  Var student_grad = po.apply(student_op.data_grad(student_output, student_measurement), final_iteration, params);
  if (max_abs(student_grad.value()) == 0.0 && max_abs(teacher_grad) == 0.0) {
    return {tape.constant(Tensor::scalar(0.0)), true};
  }
  Var c = cosine_similarity(student_grad, tape.constant(teacher_grad), cosine_eps);
  Var gap = add_constant(scale(c, -1.0), 1.0);
  return {mul(gap, gap), false};
}

Var imitation_loss(Var student_output, Var teacher_output) {
  return sum_squares(sub(student_output, teacher_output));
}

Var supervised_loss(Var student_output, Var truth) { return sum_squares(sub(student_output, truth)); }

Var convergence_regularizer(const Preconditioner& po, std::span<const Var> params,
                            const SensingOperator& student_op, const SensingOperator& teacher_op,
                            const Tensor& truth, double alpha) {
  return convergence_regularizer(po, params, student_op.gram(truth), teacher_op.gram(truth), alpha);
}

Var convergence_regularizer(const Preconditioner& po, std::span<const Var> params, const Tensor& student_gram_x,
                            const Tensor& teacher_gram_x, double alpha) {
  if (dynamic_cast<const LinearPreconditioner*>(&po) == nullptr) {
    throw std::invalid_argument("convergence regularizer requires a linear preconditioner, got " +
                                std::string(po.kind()));
  }
  require(params.size() == 1, "convergence regularizer: expected one parameter var");
  if (student_gram_x.size() != teacher_gram_x.size()) {
    throw std::invalid_argument("convergence regularizer: Gram actions differ in size");
  }
  Tape& tape = params[0].tape();
  Var preconditioned = po.apply(tape.constant(student_gram_x), 1, params);
  Var residual = sub(preconditioned, tape.constant(teacher_gram_x));
  return scale(norm(residual), alpha);
}

Var total_loss(const LossTerms& terms, const LossWeights& weights) {
  Var total = add(terms.alignment, scale(terms.imitation, weights.beta_imitation));
  total = add(total, scale(terms.supervised, weights.beta_supervised));
  if (terms.convergence) total = add(total, scale(*terms.convergence, weights.tau));
  return total;
}

double total_loss(const LossValues& values, const LossWeights& weights) {
  return values.alignment + weights.beta_imitation * values.imitation + weights.beta_supervised * values.supervised +
         weights.tau * values.convergence;
}

// ---------------------------------------------------------------------------

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "adamw"; }

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "adamw") return OptimizerKind::adamw;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "' (expected adam or adamw)");
}

void OptimizerSettings::validate() const {
  require(lr > 0.0 && std::isfinite(lr), "optimizer: lr must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0, "optimizer: beta1 must be in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "optimizer: beta2 must be in [0, 1)");
  require(eps > 0.0, "optimizer: eps must be positive");
  require(weight_decay >= 0.0 && std::isfinite(weight_decay), "optimizer: weight_decay must be >= 0");
}

AdamOptimizer::AdamOptimizer(OptimizerSettings settings, std::span<const Tensor> params) : settings_(settings) {
  settings_.validate();
  for (const Tensor& p : params) {
    m_.push_back(Tensor::zeros_like(p));
    v_.push_back(Tensor::zeros_like(p));
  }
}

void AdamOptimizer::step(std::span<Tensor> params, std::span<const Tensor> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("optimizer: expected " + std::to_string(m_.size()) + " parameter tensors");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != m_[i].shape() || params[i].shape() != m_[i].shape()) {
      throw std::invalid_argument("optimizer: shape mismatch for parameter " + std::to_string(i));
    }
    if (!grads[i].all_finite()) {
      throw std::runtime_error("optimizer: non-finite gradient for parameter " + std::to_string(i));
    }
  }

  ++steps_;
  const auto& s = settings_;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(steps_));
  const bool decoupled = s.kind == OptimizerKind::adamw;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      double gj = g[j];
      if (!decoupled) gj += s.weight_decay * p[j];
      m[j] = s.beta1 * m[j] + (1.0 - s.beta1) * gj;
      v[j] = s.beta2 * v[j] + (1.0 - s.beta2) * gj * gj;
      if (decoupled) p[j] *= 1.0 - s.lr * s.weight_decay;
      p[j] -= s.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + s.eps);
    }
  }
}

// ---------------------------------------------------------------------------

void TrainingSettings::validate() const {
  student.validate();
  teacher.validate();
  weights.validate();
  optimizer.validate();
  require(epochs >= 0, "training: epochs must be >= 0");
  require(batch_size >= 1, "training: batch_size must be >= 1");
  require(noise_sigma >= 0.0, "training: noise_sigma must be >= 0");
  require(validation_fraction >= 0.0 && validation_fraction < 1.0, "training: validation_fraction must be in [0, 1)");
  require(workers >= 1, "training: workers must be >= 1");
}

SampleObjective sample_objective(const Preconditioner& po, std::span<const Var> params,
                                 const SensingOperator& student_op, const SensingOperator& teacher_op,
                                 const Sample& sample, const Tensor& teacher_output, const TrainingSettings& settings,
                                 Tape& tape) {
  Var y = tape.constant(sample.student_measurement);
  TapedSolve solve = solve_on_tape(po, params, student_op, y, settings.student);
  const int final_iteration = std::max(settings.student.iterations, 1);

  AlignmentLoss alignment =
      gradient_alignment_loss(po, params, student_op, solve.final, y, teacher_op, teacher_output,
                              sample.teacher_measurement, final_iteration, settings.weights.cosine_eps);
  LossTerms terms;
  terms.alignment = alignment.value;
  terms.imitation = imitation_loss(solve.final, tape.constant(teacher_output));
  terms.supervised = supervised_loss(solve.final, tape.constant(sample.truth));
  const bool regularize = settings.weights.tau > 0.0 && dynamic_cast<const LinearPreconditioner*>(&po) != nullptr;
  if (regularize) {
    terms.convergence =
        convergence_regularizer(po, params, student_op, teacher_op, sample.truth, settings.student.alpha);
  }

  SampleObjective out;
  out.total = total_loss(terms, settings.weights);
  out.values.alignment = terms.alignment.value().item();
  out.values.imitation = terms.imitation.value().item();
  out.values.supervised = terms.supervised.value().item();
  out.values.convergence = regularize ? terms.convergence->value().item() : 0.0;
  out.degenerate = alignment.degenerate;
  return out;
}

TrainingError::TrainingError(int epoch, std::size_t batch, std::size_t sample, const std::string& what)
    : std::runtime_error("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ", sample " +
                         std::to_string(sample) + ": " + what),
      epoch_(epoch),
      batch_(batch),
      sample_(sample) {}

DistillSession::DistillSession(SensingOperator student_op, SensingOperator teacher_op,
                               std::unique_ptr<Preconditioner> po, TrainingSettings settings,
                               std::vector<Tensor> images)
    : student_op_(std::move(student_op)),
      teacher_op_(std::move(teacher_op)),
      po_(std::move(po)),
      settings_(std::move(settings)),
      optimizer_(settings_.optimizer, po_ ? po_->parameters() : std::span<const Tensor>{}) {
  settings_.validate();
  if (!po_) throw std::invalid_argument("distill: null preconditioner");
  if (!po_->learnable()) {
    throw std::invalid_argument("distill: preconditioner '" + std::string(po_->kind()) + "' has no parameters");
  }
  if (student_op_.image_shape() != teacher_op_.image_shape()) {
    throw std::invalid_argument("distill: student and teacher image shapes differ");
  }
  if (images.empty()) throw std::invalid_argument("distill: empty dataset");

  const std::size_t total = images.size();
  const auto held_out = static_cast<std::size_t>(std::floor(settings_.validation_fraction * total));
  training_count_ = total - held_out;
  if (training_count_ == 0) throw std::invalid_argument("distill: no training images after the validation split");

  samples_.reserve(total);
  teacher_outputs_.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    if (images[i].shape() != student_op_.image_shape()) {
      throw std::invalid_argument("distill: image " + std::to_string(i) + " has shape " +
                                  shape_string(images[i].shape()) + ", expected " +
                                  shape_string(student_op_.image_shape()));
    }
    Sample s;
    s.student_measurement =
        simulate_measurement(student_op_, images[i], settings_.noise_sigma, derive_seed(settings_.seed, i, 1)).values;
    s.teacher_measurement =
        simulate_measurement(teacher_op_, images[i], settings_.noise_sigma, derive_seed(settings_.seed, i, 2)).values;
    s.truth = std::move(images[i]);
    teacher_outputs_.push_back(run_teacher(teacher_op_, s.teacher_measurement, settings_.teacher).final);
    samples_.push_back(std::move(s));
  }
}

EpochRecord DistillSession::run_epoch() {
  const int epoch = static_cast<int>(history_.size()) + 1;

  std::vector<std::size_t> order(training_count_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 engine(derive_seed(settings_.seed, static_cast<std::uint64_t>(epoch), 3));
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(engine() % i);
    std::swap(order[i - 1], order[j]);
  }

  struct Result {
    std::vector<Tensor> grads;
    LossValues values;
    std::string error;
  };

  auto evaluate = [&](std::size_t sample_index, Result& r) {
    try {
      Tape tape;
      const auto params = po_->bind(tape, true);
      SampleObjective obj = sample_objective(*po_, params, student_op_, teacher_op_, samples_[sample_index],
                                             teacher_outputs_[sample_index], settings_, tape);
      if (!std::isfinite(obj.total.value().item())) throw std::runtime_error("non-finite loss");
      r.grads = tape.grad(obj.total, params);
      r.values = obj.values;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  };

  LossValues sums;
  const std::size_t batch_size = settings_.batch_size;
  const std::size_t workers = settings_.workers;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<Tensor> accum;
    for (const Tensor& p : po_->parameters()) accum.push_back(Tensor::zeros_like(p));

    // Chunks of `workers` samples run concurrently; accumulation follows
    // sample order so the sum does not depend on the worker count.
    for (std::size_t chunk = start; chunk < end; chunk += workers) {
      const std::size_t chunk_end = std::min(end, chunk + workers);
      std::vector<Result> results(chunk_end - chunk);
      if (results.size() == 1) {
        evaluate(order[chunk], results[0]);
      } else {
        std::vector<std::thread> threads;
        for (std::size_t i = 0; i < results.size(); ++i) {
          threads.emplace_back([&, i] { evaluate(order[chunk + i], results[i]); });
        }
        for (auto& t : threads) t.join();
      }
      for (std::size_t i = 0; i < results.size(); ++i) {
        if (!results[i].error.empty()) throw TrainingError(epoch, batch_index, order[chunk + i], results[i].error);
        for (std::size_t p = 0; p < accum.size(); ++p) {
          auto a = accum[p].data();
          auto g = results[i].grads[p].data();
          for (std::size_t j = 0; j < a.size(); ++j) a[j] += g[j];
        }
        sums.alignment += results[i].values.alignment;
        sums.imitation += results[i].values.imitation;
        sums.supervised += results[i].values.supervised;
        sums.convergence += results[i].values.convergence;
      }
    }

    const double inv = 1.0 / static_cast<double>(end - start);
    for (Tensor& a : accum) {
      for (double& v : a.data()) v *= inv;
    }
    try {
      optimizer_.step(po_->parameters(), accum);
    } catch (const std::exception& e) {
      throw TrainingError(epoch, batch_index, order[start], e.what());
    }
  }

  const double inv = 1.0 / static_cast<double>(training_count_);
  EpochRecord rec;
  rec.epoch = epoch;
  rec.alignment = sums.alignment * inv;
  rec.imitation = sums.imitation * inv;
  rec.supervised = sums.supervised * inv;
  rec.convergence = sums.convergence * inv;
  rec.validation_psnr = validation_psnr(*po_);
  history_.push_back(rec);
  return rec;
}

const std::vector<EpochRecord>& DistillSession::train() {
  while (static_cast<int>(history_.size()) < settings_.epochs) run_epoch();
  return history_;
}

double DistillSession::validation_psnr(const Preconditioner& po) const {
  if (training_count_ == samples_.size()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (std::size_t i = training_count_; i < samples_.size(); ++i) {
    const SolverRun run = solve(po, student_op_, samples_[i].student_measurement, settings_.student);
    total += psnr(samples_[i].truth, run.final);
  }
  return total / static_cast<double>(samples_.size() - training_count_);
}

double DistillSession::teacher_validation_psnr() const {
  if (training_count_ == samples_.size()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (std::size_t i = training_count_; i < samples_.size(); ++i) total += psnr(samples_[i].truth, teacher_outputs_[i]);
  return total / static_cast<double>(samples_.size() - training_count_);
}

}  // namespace dipa
