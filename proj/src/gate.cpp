#include "fetomosaic/gate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "fetomosaic/error.hpp"
#include "fetomosaic/register.hpp"

namespace fetomosaic {

std::string_view to_string(GateReason reason) {
  switch (reason) {
    case GateReason::Ok: return "Ok";
    case GateReason::TooFarFromIdentity: return "TooFarFromIdentity";
    case GateReason::CostNotDiscriminative: return "CostNotDiscriminative";
    case GateReason::RegistrationFailed: return "RegistrationFailed";
  }
  return "Unknown";
}

GateReason gate_reason_from_string(std::string_view name) {
  for (auto r : {GateReason::Ok, GateReason::TooFarFromIdentity,
                 GateReason::CostNotDiscriminative, GateReason::RegistrationFailed}) {
    if (to_string(r) == name) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown gate reason '" + std::string(name) + "'");
}

void GateConfig::validate() const {
  const bool ok = (!max_identity_distance || *max_identity_distance > 0.0) &&
                  max_identity_fraction > 0.0 && num_random_warps > 0 &&
                  random_translation_sigma > 0.0 && random_linear_sigma > 0.0 &&
                  cost_quantile > 0.0 && cost_quantile < 0.5 && cost_margin >= 0.0 &&
                  cost_margin < 1.0 && min_coherence >= 0.0 &&
                  min_coherence < 1.0;
  if (!ok) throw Error(ErrorCode::InvalidArgument, "invalid gate configuration");
}

double GateConfig::identity_threshold(int frame_width) const {
  return max_identity_distance ? *max_identity_distance : max_identity_fraction * frame_width;
}

GateVerdict failed_verdict() { return GateVerdict{}; }

std::vector<WarpParams> sample_random_warps(const GateConfig& cfg, double translation_scale) {
  std::mt19937_64 rng(cfg.rng_seed);
  std::normal_distribution<double> lin(0.0, cfg.random_linear_sigma);
  std::normal_distribution<double> trans(0.0, cfg.random_translation_sigma * translation_scale);
  std::vector<WarpParams> warps;
  warps.reserve(cfg.num_random_warps);
  for (int k = 0; k < cfg.num_random_warps; ++k) {
    const double a11 = 1.0 + lin(rng);
    const double a12 = lin(rng);
    const double tx = trans(rng);
    const double a21 = lin(rng);
    const double a22 = 1.0 + lin(rng);
    const double ty = trans(rng);
    warps.push_back(WarpParams::affine(a11, a12, tx, a21, a22, ty));
  }
  return warps;
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double t = pos - static_cast<double>(lo);
  if (std::isinf(values[lo]) || std::isinf(values[hi])) return t == 0.0 ? values[lo] : values[hi];
  return values[lo] + t * (values[hi] - values[lo]);
}

GateVerdict evaluate_gate(const PyramidLevel& fixed, const PyramidLevel& moving,
                          const WarpParams& warp, Objective objective, const RefGrid& grid,
                          const GateConfig& cfg, const CostOptions& opts, int level) {
  cfg.validate();
  const double scale = std::ldexp(1.0, -level);
  const int full_width = static_cast<int>(std::lround(fixed.width() / scale));
  const double threshold = cfg.identity_threshold(full_width) * scale;

  GateVerdict verdict;
  verdict.identity_distance = warp_distance(warp, WarpParams::identity(warp.kind()), grid);
  if (!(verdict.identity_distance <= threshold)) {
    verdict.reason = GateReason::TooFarFromIdentity;
    return verdict;
  }

  CostOptions gate_opts = opts;
  gate_opts.min_coherence = cfg.min_coherence;
  try {
    verdict.registration_cost = objective_cost(fixed, moving, warp, objective, gate_opts).cost;
  } catch (const Error&) {
    verdict.reason = GateReason::RegistrationFailed;
    return verdict;
  }

  std::vector<double> costs;
  costs.reserve(cfg.num_random_warps);
  for (const auto& w : sample_random_warps(cfg, scale)) {
    try {
      costs.push_back(objective_cost(fixed, moving, w, objective, gate_opts).cost);
    } catch (const Error&) {
      costs.push_back(std::numeric_limits<double>::infinity());
    }
  }
  verdict.random_cost_quantile_value = empirical_quantile(costs, cfg.cost_quantile);
  const double q = verdict.random_cost_quantile_value;
  verdict.reason = verdict.registration_cost < q - cfg.cost_margin * std::abs(q)
                       ? GateReason::Ok
                       : GateReason::CostNotDiscriminative;
  verdict.accepted = verdict.reason == GateReason::Ok;
  return verdict;
}

GateVerdict gate_registration(const RegistrationResult& result, const Pyramid& fixed,
                              const Pyramid& moving, const RefGrid& grid, const GateConfig& cfg,
                              const CostOptions& opts) {
  if (fixed.levels.empty() || moving.levels.empty()) {
    throw Error(ErrorCode::InvalidArgument, "gate needs non-empty pyramids");
  }
  return evaluate_gate(fixed.levels[0], moving.levels[0], result.warp, result.objective, grid,
                       cfg, opts, 0);
}

}  // namespace fetomosaic
