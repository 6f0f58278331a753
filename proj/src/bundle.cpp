#include "fetomosaic/bundle.hpp"

#include <Eigen/Sparse>
#include <unsupported/Eigen/AutoDiff>

#include <cmath>
#include <deque>
#include <string>

#include "fetomosaic/error.hpp"

namespace fetomosaic {

namespace {

bool is_exact_identity(const WarpParams& w) {
  return w.params() == WarpParams::identity().params();
}

template <int NP>
struct Problem {
  static constexpr int kLocal = 2 * NP;
  using Deriv = Eigen::Matrix<double, kLocal, 1>;
  using AD = Eigen::AutoDiffScalar<Deriv>;
  using LocalJacobian = Eigen::Matrix<double, Eigen::Dynamic, kLocal>;

  const std::vector<Constraint>& constraints;
  const RefGrid& grid;
  const std::vector<int>& column;  // parameter block per frame, -1 when frozen
  WarpKind kind;

  // Global warp with derivative seeds in slot 0 (W_i) or slot 1 (W_j).
  Warp<AD> seeded(const WarpParams& w, int slot, bool free) const {
    typename Warp<AD>::Params p;
    for (int k = 0; k < 8; ++k) {
      p(k) = AD(w[k], Deriv::Zero());
      if (free && k < NP) p(k).derivatives()(slot * NP + k) = 1.0;
    }
    return Warp<AD>(p, kind);
  }

  // Residuals of one constraint (2 rows per grid point) and their Jacobian
  // with respect to [params(W_i); params(W_j)].
  void linearize(const Constraint& c, const std::vector<WarpParams>& globals, Eigen::VectorXd& r,
                 LocalJacobian& jac) const {
    const auto wi = seeded(globals[c.i], 0, column[c.i] >= 0);
    const auto wj = seeded(globals[c.j], 1, column[c.j] >= 0);
    const auto rel = compose(wi, invert(wj));
    const Eigen::Index n = grid.size();
    r.resize(2 * n);
    jac.resize(2 * n, kLocal);
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Vector2d x = grid.points().col(k);
      const auto y = apply_warp(rel, Eigen::Matrix<AD, 2, 1>(AD(x.x()), AD(x.y())));
      const Point2 target = apply_warp(c.warp, x);
      for (int d = 0; d < 2; ++d) {
        r(2 * k + d) = y(d).value() - target(d);
        jac.row(2 * k + d) = y(d).derivatives().transpose();
      }
    }
  }
};

double constraint_sq(const Constraint& c, const std::vector<WarpParams>& globals,
                     const RefGrid& grid) {
  const WarpParams rel = compose(globals[c.i], invert(globals[c.j]));
  double sum = 0.0;
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const Point2 x = grid.points().col(k);
    sum += (apply_warp(rel, x) - apply_warp(c.warp, x)).squaredNorm();
  }
  return sum;
}

std::vector<WarpParams> step_globals(const std::vector<WarpParams>& globals,
                                     const std::vector<int>& column, const Eigen::VectorXd& delta,
                                     int np, WarpKind kind) {
  std::vector<WarpParams> out = globals;
  for (std::size_t f = 0; f < globals.size(); ++f) {
    if (column[f] < 0) continue;
    auto p = globals[f].params();
    p.head(np) += delta.segment(static_cast<Eigen::Index>(column[f]) * np, np);
    out[f] = WarpParams(p, kind);
  }
  return out;
}

template <int NP>
BundleResult solve(const PoseGraph& graph, const RefGrid& report_grid, const LmConfig& cfg) {
  BundleResult result;
  result.graph = graph;
  PoseGraph& g = result.graph;
  const int n = g.num_frames;
  if (g.bridged.empty()) g.bridged.assign(n, false);

  const std::vector<bool> reach = reachable_from_first(n, g.constraints);
  g.excluded.assign(n, false);
  std::vector<int> reachable;
  for (int f = 0; f < n; ++f) {
    if (reach[f]) {
      reachable.push_back(f);
    } else {
      g.excluded[f] = true;
    }
  }
  if (cfg.require_connected && static_cast<int>(reachable.size()) != n) {
    throw DisconnectedGraphError(reachable, std::to_string(n - static_cast<int>(reachable.size())) +
                                                " frame(s) unreachable from frame 0");
  }

  for (auto& w : g.globals) {
    if (cfg.global_kind == WarpKind::Affine && !w.is_affine()) {
      throw Error(ErrorCode::InvalidArgument, "affine bundle needs affine initial globals");
    }
    w = WarpParams(w.params(), cfg.global_kind);
  }

  std::vector<int> column(n, -1);
  int blocks = 0;
  for (int f = 1; f < n; ++f) {
    if (reach[f]) column[f] = blocks++;
  }
  std::vector<Constraint> active;
  for (const auto& c : g.constraints) {
    if (c.accepted && reach[c.i] && reach[c.j]) active.push_back(c);
  }

  const RefGrid grid(report_grid.width(), report_grid.height(), cfg.solver_grid_step);
  const Problem<NP> problem{active, grid, column, cfg.global_kind};
  const Eigen::Index dim = static_cast<Eigen::Index>(blocks) * NP;

  double cost = bundle_cost(g.globals, active, grid);
  result.initial_cost = cost;
  result.cost_history.push_back(cost);
  if (!(cost <= cfg.divergence_cost)) {
    throw Error(ErrorCode::SolverDiverged, "initial bundle cost " + std::to_string(cost));
  }

  double damping = cfg.initial_damping;
  Eigen::VectorXd r;
  typename Problem<NP>::LocalJacobian jac;
  while (dim > 0 && cost > 0.0 && result.iterations < cfg.max_iterations) {
    ++result.iterations;
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
    for (const auto& c : active) {
      problem.linearize(c, g.globals, r, jac);
      const Eigen::Matrix<double, 2 * NP, 2 * NP> h = jac.transpose() * jac;
      const Eigen::Matrix<double, 2 * NP, 1> b = jac.transpose() * r;
      const int cols[2] = {column[c.i], column[c.j]};
      for (int a = 0; a < 2; ++a) {
        if (cols[a] < 0) continue;
        grad.segment<NP>(cols[a] * NP) += b.template segment<NP>(a * NP);
        for (int bb = 0; bb < 2; ++bb) {
          if (cols[bb] < 0) continue;
          for (int u = 0; u < NP; ++u) {
            for (int v = 0; v < NP; ++v) {
              triplets.emplace_back(cols[a] * NP + u, cols[bb] * NP + v, h(a * NP + u, bb * NP + v));
            }
          }
        }
      }
    }
    Eigen::SparseMatrix<double> hess(dim, dim);
    hess.setFromTriplets(triplets.begin(), triplets.end());
    const Eigen::VectorXd diag = hess.diagonal();
    const double floor = 1e-12 * std::max(diag.maxCoeff(), 1e-300);

    bool accepted = false;
    double step_norm = 0.0;
    double new_cost = cost;
    while (damping < 1e12) {
      Eigen::SparseMatrix<double> a = hess;
      for (Eigen::Index k = 0; k < dim; ++k) a.coeffRef(k, k) += damping * std::max(diag(k), floor);
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
      Eigen::VectorXd delta;
      if (ldlt.info() == Eigen::Success) delta = -ldlt.solve(grad);
      if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
        damping *= 4.0;
        continue;
      }
      step_norm = delta.norm();
      try {
        auto trial = step_globals(g.globals, column, delta, NP, cfg.global_kind);
        const double c = bundle_cost(trial, active, grid);
        if (c < cost) {
          g.globals = std::move(trial);
          new_cost = c;
          accepted = true;
          damping = std::max(damping / 3.0, 1e-15);
          break;
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SingularWarp && e.code() != ErrorCode::DenominatorNearZero) throw;
      }
      if (step_norm < cfg.step_tol) break;
      damping *= 4.0;
    }
    if (!accepted) {
      result.converged = true;
      break;
    }
    const double decrease = (cost - new_cost) / cost;
    cost = new_cost;
    result.cost_history.push_back(cost);
    if (cost > cfg.divergence_cost) {
      throw Error(ErrorCode::SolverDiverged, "bundle cost " + std::to_string(cost));
    }
    if (decrease < cfg.relative_cost_tol || step_norm < cfg.step_tol) {
      result.converged = true;
      break;
    }
  }
  if (dim == 0 || cost == 0.0) result.converged = true;
  result.final_cost = cost;

  for (auto& c : g.constraints) {
    c.distance.reset();
    if (g.excluded[c.i] || g.excluded[c.j]) continue;
    c.distance = warp_distance(compose(g.globals[c.i], invert(g.globals[c.j])), c.warp, report_grid);
  }
  return result;
}

}  // namespace

void PoseGraph::validate() const {
  if (num_frames < 1 || static_cast<int>(globals.size()) != num_frames) {
    throw Error(ErrorCode::LengthMismatch, "pose graph needs one global warp per frame");
  }
  if ((!bridged.empty() && static_cast<int>(bridged.size()) != num_frames) ||
      (!excluded.empty() && static_cast<int>(excluded.size()) != num_frames)) {
    throw Error(ErrorCode::LengthMismatch, "frame flags do not match the frame count");
  }
  if (!is_exact_identity(globals[0])) {
    throw Error(ErrorCode::InvalidArgument, "globals[0] must be the identity");
  }
  for (const auto& c : constraints) {
    if (c.i < 0 || c.j < 0 || c.i >= num_frames || c.j >= num_frames || c.i == c.j) {
      throw Error(ErrorCode::InvalidArgument, "constraint (" + std::to_string(c.i) + ", " +
                                                  std::to_string(c.j) + ") is out of range");
    }
  }
}

ChainResult sequential_chain(int num_frames, const std::vector<Constraint>& constraints) {
  if (num_frames < 1) throw Error(ErrorCode::InvalidArgument, "need at least one frame");
  // Link i holds w_{i,i-1}; a reversed constraint (i-1, i) is inverted.
  std::vector<std::optional<WarpParams>> link(num_frames);
  for (const auto& c : constraints) {
    if (!c.accepted) continue;
    if (c.i >= 1 && c.i < num_frames && c.j == c.i - 1 && !link[c.i]) {
      link[c.i] = c.warp;
    } else if (c.j >= 1 && c.j < num_frames && c.i == c.j - 1 && !link[c.j]) {
      link[c.j] = invert(c.warp);
    }
  }
  ChainResult out;
  out.globals.assign(num_frames, WarpParams::identity());
  out.bridged.assign(num_frames, false);
  for (int i = 1; i < num_frames; ++i) {
    if (link[i]) {
      out.globals[i] = compose(*link[i], out.globals[i - 1]);
      out.bridged[i] = out.bridged[i - 1];
    } else {
      out.globals[i] = out.globals[i - 1];
      out.bridged[i] = true;
    }
  }
  return out;
}

std::vector<bool> reachable_from_first(int num_frames, const std::vector<Constraint>& constraints) {
  std::vector<std::vector<int>> adj(num_frames);
  for (const auto& c : constraints) {
    if (!c.accepted) continue;
    adj[c.i].push_back(c.j);
    adj[c.j].push_back(c.i);
  }
  std::vector<bool> seen(num_frames, false);
  if (num_frames == 0) return seen;
  std::deque<int> queue{0};
  seen[0] = true;
  while (!queue.empty()) {
    const int f = queue.front();
    queue.pop_front();
    for (int nb : adj[f]) {
      if (!seen[nb]) {
        seen[nb] = true;
        queue.push_back(nb);
      }
    }
  }
  return seen;
}

void LmConfig::validate() const {
  const bool ok = max_iterations > 0 && relative_cost_tol > 0.0 && step_tol > 0.0 &&
                  initial_damping > 0.0 && divergence_cost > 0.0 && solver_grid_step > 0;
  if (!ok) throw Error(ErrorCode::InvalidArgument, "invalid bundle configuration");
}

double bundle_cost(const std::vector<WarpParams>& globals, const std::vector<Constraint>& constraints,
                   const RefGrid& grid) {
  double sum = 0.0;
  for (const auto& c : constraints) {
    if (c.accepted) sum += constraint_sq(c, globals, grid);
  }
  return sum;
}

BundleResult bundle_adjust(const PoseGraph& graph, const RefGrid& grid, const LmConfig& cfg) {
  cfg.validate();
  graph.validate();
  if (cfg.global_kind == WarpKind::Affine) return solve<6>(graph, grid, cfg);
  return solve<8>(graph, grid, cfg);
}

}  // namespace fetomosaic
