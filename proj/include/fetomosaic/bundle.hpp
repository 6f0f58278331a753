#pragma once

// Global placement of frames. A constraint (i, j, w) states
// W_i o W_j^-1 == w, where W_i maps mosaic (frame 0) coordinates into frame i.

#include <optional>
#include <vector>

#include "fetomosaic/gate.hpp"
#include "fetomosaic/geometry.hpp"

namespace fetomosaic {

struct Constraint {
  int i = 0;
  int j = 0;
  WarpParams warp;
  bool accepted = true;
  GateReason reason = GateReason::Ok;
  // warp_distance(W_i o W_j^-1, warp) after optimization.
  std::optional<double> distance;
};

struct PoseGraph {
  int num_frames = 0;
  std::vector<Constraint> constraints;
  std::vector<WarpParams> globals;
  std::vector<bool> bridged;
  std::vector<bool> excluded;

  void validate() const;
};

struct ChainResult {
  std::vector<WarpParams> globals;
  std::vector<bool> bridged;
};

// W_0 = identity, W_i = w_{i,i-1} o W_{i-1}. A missing or rejected link
// repeats the previous warp and flags frame i and every later frame.
ChainResult sequential_chain(int num_frames, const std::vector<Constraint>& constraints);

// Frames connected to frame 0 through accepted constraints.
std::vector<bool> reachable_from_first(int num_frames, const std::vector<Constraint>& constraints);

struct LmConfig {
  int max_iterations = 200;
  double relative_cost_tol = 1e-10;
  double step_tol = 1e-9;
  double initial_damping = 1e-4;
  double divergence_cost = 1e12;
  // Residual lattice step inside the solver; reporting uses the caller's grid.
  int solver_grid_step = 24;
  WarpKind global_kind = WarpKind::Affine;
  // Throw DisconnectedGraph instead of excluding unreachable frames.
  bool require_connected = false;

  void validate() const;
};

struct BundleResult {
  PoseGraph graph;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;  // one entry per accepted iterate
};

// Sum of squared grid-point deviations over the accepted constraints.
double bundle_cost(const std::vector<WarpParams>& globals, const std::vector<Constraint>& constraints,
                   const RefGrid& grid);

// Levenberg-Marquardt on all globals except W_0. `grid` spans the frame
// domain and is used for the per-constraint report distances.
BundleResult bundle_adjust(const PoseGraph& graph, const RefGrid& grid, const LmConfig& cfg = {});

}  // namespace fetomosaic
