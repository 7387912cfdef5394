#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "dipa/denoisers.hpp"
#include "dipa/operators.hpp"
#include "dipa/preconditioners.hpp"
#include "dipa/tape.hpp"

namespace dipa {

enum class Scheme { pnp, red };

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view name);

struct SolverConfig {
  Scheme scheme = Scheme::pnp;
  int iterations = 20;
  double alpha = 0.4;
  double lambda = 0.0;  // RED weight; ignored by PnP
  Denoiser denoiser;
  bool record_trajectory = false;
  // false forces the momentum weight to zero (plain preconditioned steps).
  bool accelerate = true;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  Tensor iterate;
  double data_fidelity = 0.0;
  std::optional<double> psnr;
};

struct SolverRun {
  Tensor final;
  std::vector<IterationRecord> trajectory;
};

// Thrown when an iterate stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int iteration, const std::string& what) : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

struct MomentumStep {
  double t = 1.0;
  double weight = 0.0;
};

// t' = (1 + sqrt(1 + 4 t^2)) / 2, weight = (t - 1) / t'.
MomentumStep momentum_next(double t);

struct TapedSolve {
  Var final;
  SolverRun run;
};

// Preconditioned FISTA recorded on measurement's tape. Starting from
// x0 = z1 = 0, for k = 1..K:
//   PnP: x_k = D(z_k - alpha P(A^T(A z_k - y), k))
//   RED: x_k = z_k - alpha (P(A^T(A z_k - y), k) + lambda (z_k - D(z_k)))
//   z_{k+1} = x_k + w_k (x_k - x_{k-1})
// params are the preconditioner's vars bound on the same tape. truth, when
// given, adds PSNR to the recorded trajectory.
TapedSolve solve_on_tape(const Preconditioner& po, std::span<const Var> params, const SensingOperator& op,
                         Var measurement, const SolverConfig& config, const Tensor* truth = nullptr);

// Convenience runner on a private tape with constant parameters.
SolverRun solve(const Preconditioner& po, const SensingOperator& op, const Tensor& measurement,
                const SolverConfig& config, const Tensor* truth = nullptr);
// Same as solve() with the scheme checked.
SolverRun solve_pnp(const Preconditioner& po, const SensingOperator& op, const Tensor& measurement,
                    const SolverConfig& config, const Tensor* truth = nullptr);
SolverRun solve_red(const Preconditioner& po, const SensingOperator& op, const Tensor& measurement,
                    const SolverConfig& config, const Tensor* truth = nullptr);

// The teacher algorithm: the same solver with the identity preconditioner.
SolverRun run_teacher(const SensingOperator& teacher_op, const Tensor& measurement, const SolverConfig& config,
                      const Tensor* truth = nullptr);

}  // namespace dipa
