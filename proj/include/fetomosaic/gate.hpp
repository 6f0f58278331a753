#pragma once

// Accept/reject test for a pairwise registration: the warp must stay close
// to the identity and its cost must beat most random warps drawn around the
// identity.

#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "fetomosaic/costs.hpp"
#include "fetomosaic/geometry.hpp"
#include "fetomosaic/imageproc.hpp"

namespace fetomosaic {

struct RegistrationResult;

enum class GateReason { Ok, TooFarFromIdentity, CostNotDiscriminative, RegistrationFailed };

std::string_view to_string(GateReason reason);
GateReason gate_reason_from_string(std::string_view name);

struct GateConfig {
  // Pixels at full resolution; unset means max_identity_fraction * width.
  std::optional<double> max_identity_distance;
  double max_identity_fraction = 0.35;
  int num_random_warps = 30;
  double random_translation_sigma = 5.0;
  double random_linear_sigma = 0.02;
  double cost_quantile = 0.05;
  // Accept only below q - cost_margin * |q| for the random quantile q. Fitting a warp to
  // unrelated textured frames still lowers the cost a few percent under the
  // random sample; 0 gives the bare quantile test.
  double cost_margin = 0.1;
  // Coherence threshold used for every cost the gate evaluates. With the
  // registration's filter the surviving samples depend on the sub-pixel
  // position, and a fitted warp can win by selecting favourable samples.
  double min_coherence = 0.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
  double identity_threshold(int frame_width) const;
};

struct GateVerdict {
  bool accepted = false;
  GateReason reason = GateReason::RegistrationFailed;
  double registration_cost = std::numeric_limits<double>::quiet_NaN();
  double random_cost_quantile_value = std::numeric_limits<double>::quiet_NaN();
  double identity_distance = std::numeric_limits<double>::quiet_NaN();
};

GateVerdict failed_verdict();

// Identity plus Gaussian perturbations of the linear part and translation.
// `translation_scale` rescales the translation sigma (2^-level on a pyramid).
std::vector<WarpParams> sample_random_warps(const GateConfig& cfg, double translation_scale = 1.0);

// Linear interpolation between order statistics.
double empirical_quantile(std::vector<double> values, double q);

// Gate test on one pyramid level (level 0 is full resolution). Distances and
// sigmas given in full-resolution pixels are scaled down by 2^level. The
// identity test comes first; the warp's cost is then evaluated fixed -> moving
// with the same options as the random sample (opts with cfg.min_coherence).
GateVerdict evaluate_gate(const PyramidLevel& fixed, const PyramidLevel& moving,
                          const WarpParams& warp, Objective objective, const RefGrid& grid,
                          const GateConfig& cfg, const CostOptions& opts = {}, int level = 0);

// Final check at full resolution, with the result's objective.
GateVerdict gate_registration(const RegistrationResult& result, const Pyramid& fixed,
                              const Pyramid& moving, const RefGrid& grid, const GateConfig& cfg,
                              const CostOptions& opts = {});

}  // namespace fetomosaic
