#include "dipa/solvers.hpp"

#include <cmath>
#include <string>

#include "dipa/autodiff.hpp"
#include "dipa/metrics.hpp"

namespace dipa {

std::string_view to_string(Scheme scheme) { return scheme == Scheme::pnp ? "pnp" : "red"; }

Scheme parse_scheme(std::string_view name) {
  if (name == "pnp") return Scheme::pnp;
  if (name == "red") return Scheme::red;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "' (expected pnp or red)");
}

void SolverConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("solver: iterations must be >= 0");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("solver: alpha must be positive");
  if (scheme == Scheme::red && !(lambda >= 0.0)) throw std::invalid_argument("solver: lambda must be >= 0");
}

MomentumStep momentum_next(double t) {
  if (!(t >= 1.0)) throw std::invalid_argument("momentum_next: t must be >= 1");
  const double next = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
  return {next, (t - 1.0) / next};
}

TapedSolve solve_on_tape(const Preconditioner& po, std::span<const Var> params, const SensingOperator& op,
                         Var measurement, const SolverConfig& config, const Tensor* truth) {
  config.validate();
  Tape& tape = measurement.tape();
  TapedSolve out;

  Var previous = tape.constant(Tensor(op.image_shape()));
  Var z = previous;
  double t = 1.0;
  for (int k = 1; k <= config.iterations; ++k) {
    Var step = po.apply(op.data_grad(z, measurement), k, params);
    Var x;
    if (config.scheme == Scheme::pnp) {
      x = config.denoiser.denoise(sub(z, scale(step, config.alpha)));
    } else {
      Var direction = config.lambda == 0.0 ? step : add(step, scale(config.denoiser.red_residual(z), config.lambda));
      x = sub(z, scale(direction, config.alpha));
    }
    if (!x.value().all_finite()) {
      throw DivergenceError(k, "solver diverged: non-finite iterate at iteration " + std::to_string(k));
    }

    if (config.record_trajectory) {
      IterationRecord rec;
      rec.iteration = k;
      rec.iterate = x.value();
      rec.data_fidelity = op.data_fidelity(x.value(), measurement.value());
      if (truth != nullptr) rec.psnr = psnr(*truth, x.value());
      out.run.trajectory.push_back(std::move(rec));
    }

    const MomentumStep m = momentum_next(t);
    t = m.t;
    const double weight = config.accelerate ? m.weight : 0.0;
    z = weight == 0.0 ? x : add(x, scale(sub(x, previous), weight));
    previous = x;
  }
  out.final = previous;
  out.run.final = previous.value();
  return out;
}

SolverRun solve(const Preconditioner& po, const SensingOperator& op, const Tensor& measurement,
                const SolverConfig& config, const Tensor* truth) {
  Tape tape;
  const auto params = po.bind(tape, false);
  return solve_on_tape(po, params, op, tape.constant(measurement), config, truth).run;
}

SolverRun solve_pnp(const Preconditioner& po, const SensingOperator& op, const Tensor& measurement,
                    const SolverConfig& config, const Tensor* truth) {
  if (config.scheme != Scheme::pnp) throw std::invalid_argument("solve_pnp: config scheme is not pnp");
  return solve(po, op, measurement, config, truth);
}

SolverRun solve_red(const Preconditioner& po, const SensingOperator& op, const Tensor& measurement,
                    const SolverConfig& config, const Tensor* truth) {
  if (config.scheme != Scheme::red) throw std::invalid_argument("solve_red: config scheme is not red");
  return solve(po, op, measurement, config, truth);
}

SolverRun run_teacher(const SensingOperator& teacher_op, const Tensor& measurement, const SolverConfig& config,
                      const Tensor* truth) {
  return solve(IdentityPreconditioner{}, teacher_op, measurement, config, truth);
}

}  // namespace dipa
