#pragma once

// Pairwise dense registration, coarse to fine, by damped Gauss-Newton on one
// of the objectives in costs.hpp.

#include <optional>
#include <string_view>
#include <vector>

#include "fetomosaic/costs.hpp"
#include "fetomosaic/gate.hpp"
#include "fetomosaic/geometry.hpp"
#include "fetomosaic/imageproc.hpp"

namespace fetomosaic {

struct RegistrationConfig {
  int num_levels = kDefaultPyramidLevels;
  int max_iters_per_level = 50;
  double param_tol = 1e-7;
  double cost_tol = 1e-9;
  WarpKind warp_kind = WarpKind::Affine;
  bool bidirectional = true;
  Objective objective = Objective::SinSqOrientation;
  CostOptions cost;
  double initial_damping = 1e-3;
  // Gate every coarse level; a rejected level restarts the next one from the
  // (rescaled) initial warp.
  bool gate_each_level = true;
  GateConfig level_gate;

  void validate() const;
};

enum class Direction { Forward, BackwardInverted };

std::string_view to_string(Direction direction);

struct LevelDiagnostics {
  int level = 0;
  int iterations = 0;
  double cost = 0.0;
  bool accepted = false;
};

struct RegistrationResult {
  // Maps fixed-image points into the moving image.
  WarpParams warp;
  double final_cost = 0.0;
  Eigen::Index num_valid_pixels = 0;
  std::vector<LevelDiagnostics> per_level;  // coarsest first
  Direction direction = Direction::Forward;
  Objective objective = Objective::SinSqOrientation;
  // Raw outcomes of both runs when bidirectional; backward_warp maps moving
  // points into the fixed image.
  std::optional<WarpParams> forward_warp;
  std::optional<WarpParams> backward_warp;
  std::optional<double> forward_cost;
  std::optional<double> backward_cost;
};

struct StepResult {
  WarpParams warp;
  double cost = 0.0;
  double step_norm = 0.0;
  bool improved = false;
  Eigen::Index n_valid = 0;
};

// One Levenberg-damped Gauss-Newton update. `damping` is halved after an
// accepted step and multiplied by 4 after each rejected trial. Returns the
// input warp with improved == false when no trial lowers the cost.
StepResult gauss_newton_step(const PyramidLevel& fixed, const PyramidLevel& moving,
                             const WarpParams& p, Objective objective, double& damping,
                             const CostOptions& opts = {});

struct LevelFit {
  WarpParams warp;
  double cost = 0.0;
  Eigen::Index n_valid = 0;
  int iterations = 0;
  std::vector<double> cost_history;
};

LevelFit fit_level(const PyramidLevel& fixed, const PyramidLevel& moving, const WarpParams& init,
                   const RegistrationConfig& cfg);

// Expresses a full-resolution warp in the coordinates of pyramid level k.
WarpParams warp_to_level(const WarpParams& w, int level);
// Level k+1 -> level k.
WarpParams upscale_warp(const WarpParams& w);

RegistrationResult register_pair(const Pyramid& fixed, const Pyramid& moving,
                                 const RegistrationConfig& cfg,
                                 const std::optional<WarpParams>& init = std::nullopt);

}  // namespace fetomosaic
