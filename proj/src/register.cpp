#include "fetomosaic/register.hpp"

#include <cmath>
#include <limits>

#include "fetomosaic/error.hpp"

namespace fetomosaic {

namespace {

constexpr double kMaxDamping = 1e8;

bool recoverable(ErrorCode code) {
  return code == ErrorCode::InsufficientOverlap || code == ErrorCode::NormalEquationsSingular ||
         code == ErrorCode::ZeroVariance || code == ErrorCode::SingularWarp ||
         code == ErrorCode::DenominatorNearZero;
}

RegistrationResult register_one_direction(const Pyramid& fixed, const Pyramid& moving,
                                          const RegistrationConfig& cfg, const WarpParams& init) {
  if (fixed.num_levels() != moving.num_levels() || fixed.num_levels() == 0) {
    throw Error(ErrorCode::InvalidArgument, "pyramids must have the same non-zero depth");
  }
  const int top = std::min(fixed.num_levels(), cfg.num_levels) - 1;

  RegistrationResult result;
  result.objective = cfg.objective;
  WarpParams p = warp_to_level(init, top);
  for (int level = top; level >= 0; --level) {
    const auto& fl = fixed.levels[level];
    const auto& ml = moving.levels[level];
    LevelDiagnostics diag;
    diag.level = level;
    diag.cost = std::numeric_limits<double>::quiet_NaN();
    bool accepted = false;
    try {
      const LevelFit fit = fit_level(fl, ml, p, cfg);
      p = fit.warp;
      diag.iterations = fit.iterations;
      diag.cost = fit.cost;
      accepted = true;
      if (level == 0) {
        result.warp = fit.warp;
        result.final_cost = fit.cost;
        result.num_valid_pixels = fit.n_valid;
      } else if (cfg.gate_each_level) {
        const RefGrid grid(fl.width(), fl.height(), 3);
        accepted = evaluate_gate(fl, ml, p, cfg.objective, grid, cfg.level_gate,
                                 cfg.cost, level)
                       .accepted;
      }
    } catch (const Error& e) {
      if (level == 0 || !recoverable(e.code())) throw;
    }
    diag.accepted = accepted;
    result.per_level.push_back(diag);
    if (level > 0) p = accepted ? upscale_warp(p) : warp_to_level(init, level - 1);
  }
  return result;
}

}  // namespace

void RegistrationConfig::validate() const {
  const bool ok = num_levels >= 1 && max_iters_per_level > 0 && param_tol > 0.0 &&
                  cost_tol > 0.0 && initial_damping > 0.0 && cost.grad_eps > 0.0 &&
                  cost.min_coherence >= 0.0 && cost.min_coherence < 1.0 &&
                  cost.min_overlap_fraction > 0.0 && cost.min_overlap_fraction <= 1.0;
  if (!ok) throw Error(ErrorCode::InvalidArgument, "invalid registration configuration");
  level_gate.validate();
}

std::string_view to_string(Direction direction) {
  return direction == Direction::Forward ? "forward" : "backward_inverted";
}

WarpParams warp_to_level(const WarpParams& w, int level) {
  const double s = std::ldexp(1.0, level);
  auto p = w.params();
  p(2) /= s;
  p(5) /= s;
  p(6) *= s;
  p(7) *= s;
  return WarpParams(p, w.kind());
}

WarpParams upscale_warp(const WarpParams& w) {
  auto p = w.params();
  p(2) *= 2.0;
  p(5) *= 2.0;
  p(6) *= 0.5;
  p(7) *= 0.5;
  return WarpParams(p, w.kind());
}

StepResult gauss_newton_step(const PyramidLevel& fixed, const PyramidLevel& moving,
                             const WarpParams& p, Objective objective, double& damping,
                             const CostOptions& opts) {
  const Linearization lin = linearize(fixed, moving, p, objective, opts, true);
  const int dof = p.dof();
  const Eigen::MatrixXd h = lin.jacobian.transpose() * lin.jacobian;
  const Eigen::VectorXd g = lin.jacobian.transpose() * lin.residuals;

  StepResult out{p, lin.cost, 0.0, false, lin.n_valid};

  // Marquardt scaling of the damping term, floored so flat directions stay
  // solvable.
  const double floor = 1e-12 * std::max(h.diagonal().maxCoeff(), 1e-300);
  const Eigen::VectorXd diag = h.diagonal().cwiseMax(floor);

  bool any_solve = false;
  while (damping <= kMaxDamping) {
    Eigen::MatrixXd a = h;
    a.diagonal() += damping * diag;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    Eigen::VectorXd delta;
    if (ldlt.info() == Eigen::Success) delta = -ldlt.solve(g);
    if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
      damping *= 4.0;
      continue;
    }
    any_solve = true;
    const double norm = delta.norm();
    if (norm < 1e-14) {
      out.step_norm = norm;
      return out;
    }
    try {
      auto params = p.params();
      params.head(dof) += delta;
      const WarpParams trial(params, p.kind());
      const CostValue c = objective_cost(fixed, moving, trial, objective, opts);
      if (c.cost < lin.cost) {
        damping = std::max(damping * 0.5, 1e-12);
        return {trial, c.cost, norm, true, c.n_valid};
      }
    } catch (const Error& e) {
      if (!recoverable(e.code())) throw;
    }
    damping *= 4.0;
  }
  if (!any_solve) {
    throw Error(ErrorCode::NormalEquationsSingular, "damped normal equations not solvable");
  }
  return out;
}

LevelFit fit_level(const PyramidLevel& fixed, const PyramidLevel& moving, const WarpParams& init,
                   const RegistrationConfig& cfg) {
  LevelFit fit;
  fit.warp = init;
  const CostValue start = objective_cost(fixed, moving, init, cfg.objective, cfg.cost);
  fit.cost = start.cost;
  fit.n_valid = start.n_valid;
  fit.cost_history.push_back(fit.cost);
  double damping = cfg.initial_damping;
  for (int it = 0; it < cfg.max_iters_per_level; ++it) {
    const StepResult step =
        gauss_newton_step(fixed, moving, fit.warp, cfg.objective, damping, cfg.cost);
    ++fit.iterations;
    if (!step.improved) break;
    const double decrease = (fit.cost - step.cost) / std::max(std::abs(fit.cost), 1e-300);
    fit.warp = step.warp;
    fit.cost = step.cost;
    fit.n_valid = step.n_valid;
    fit.cost_history.push_back(fit.cost);
    if (step.step_norm < cfg.param_tol || decrease < cfg.cost_tol) break;
  }
  return fit;
}

RegistrationResult register_pair(const Pyramid& fixed, const Pyramid& moving,
                                 const RegistrationConfig& cfg,
                                 const std::optional<WarpParams>& init) {
  cfg.validate();
  const WarpParams start = init.value_or(WarpParams::identity(cfg.warp_kind));

  std::optional<RegistrationResult> fwd;
  std::optional<Error> fwd_error;
  try {
    fwd = register_one_direction(fixed, moving, cfg, start);
  } catch (const Error& e) {
    if (!cfg.bidirectional || !recoverable(e.code())) throw;
    fwd_error = e;
  }
  if (!cfg.bidirectional) return *fwd;

  std::optional<RegistrationResult> bwd;
  try {
    bwd = register_one_direction(moving, fixed, cfg, invert(start));
  } catch (const Error& e) {
    if (!fwd || !recoverable(e.code())) throw;
  }
  if (!fwd && !bwd) throw *fwd_error;

  RegistrationResult out;
  if (fwd && (!bwd || fwd->final_cost <= bwd->final_cost)) {
    out = *fwd;
  } else {
    out = *bwd;
    out.warp = invert(bwd->warp);
    out.direction = Direction::BackwardInverted;
  }
  if (fwd) {
    out.forward_warp = fwd->warp;
    out.forward_cost = fwd->final_cost;
  }
  if (bwd) {
    out.backward_warp = bwd->warp;
    out.backward_cost = bwd->final_cost;
  }
  return out;
}

}  // namespace fetomosaic
