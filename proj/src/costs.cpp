#include "fetomosaic/costs.hpp"

#include <array>
#include <cmath>
#include <string>

#include "fetomosaic/error.hpp"

namespace fetomosaic {

namespace {

// Warped position of a fixed pixel together with the derivatives the
// Jacobian needs: du/dp, A = du/dx and dA/dp.
struct WarpLocal {
  Eigen::Vector2d u;
  Eigen::Matrix<double, 2, 8> du_dp;
  Eigen::Matrix2d a;
  std::array<Eigen::Matrix2d, 8> da_dp;
};

bool local_warp(const WarpParams& w, double x, double y, bool derivatives, WarpLocal& out) {
  const auto& p = w.params();
  const double d = p(6) * x + p(7) * y + 1.0;
  if (!(std::abs(d) > 1e-9)) return false;
  const double inv_d = 1.0 / d;
  const double u = (p(0) * x + p(1) * y + p(2)) * inv_d;
  const double v = (p(3) * x + p(4) * y + p(5)) * inv_d;
  out.u = Eigen::Vector2d(u, v);
  out.a << (p(0) - u * p(6)) * inv_d, (p(1) - u * p(7)) * inv_d,  //
      (p(3) - v * p(6)) * inv_d, (p(4) - v * p(7)) * inv_d;
  if (!derivatives) return true;

  out.du_dp << x, y, 1, 0, 0, 0, -u * x, -u * y,  //
      0, 0, 0, x, y, 1, -v * x, -v * y;
  out.du_dp *= inv_d;

  const int dof = w.dof();
  for (int j = 0; j < dof; ++j) {
    const double dd = (j == 6 ? x : 0.0) + (j == 7 ? y : 0.0);
    const double du = out.du_dp(0, j);
    const double dv = out.du_dp(1, j);
    Eigen::Matrix2d m;
    m(0, 0) = ((j == 0 ? 1.0 : 0.0) - p(6) * du - (j == 6 ? u : 0.0)) * inv_d -
              out.a(0, 0) * dd * inv_d;
    m(0, 1) = ((j == 1 ? 1.0 : 0.0) - p(7) * du - (j == 7 ? u : 0.0)) * inv_d -
              out.a(0, 1) * dd * inv_d;
    m(1, 0) = ((j == 3 ? 1.0 : 0.0) - p(6) * dv - (j == 6 ? v : 0.0)) * inv_d -
              out.a(1, 0) * dd * inv_d;
    m(1, 1) = ((j == 4 ? 1.0 : 0.0) - p(7) * dv - (j == 7 ? v : 0.0)) * inv_d -
              out.a(1, 1) * dd * inv_d;
    out.da_dp[j] = m;
  }
  return true;
}

struct Cell {
  Eigen::Index x0;
  Eigen::Index y0;
  double a;
  double b;
};

// Bilinear cell containing u with all four corners valid.
bool locate_cell(const Mask& valid, const Eigen::Vector2d& u, Cell& cell) {
  const double fx = std::floor(u.x());
  const double fy = std::floor(u.y());
  if (!(fx >= 0.0 && fy >= 0.0 && fx + 1.0 < static_cast<double>(valid.cols()) &&
        fy + 1.0 < static_cast<double>(valid.rows()))) {
    return false;
  }
  cell.x0 = static_cast<Eigen::Index>(fx);
  cell.y0 = static_cast<Eigen::Index>(fy);
  cell.a = u.x() - fx;
  cell.b = u.y() - fy;
  return valid(cell.y0, cell.x0) && valid(cell.y0, cell.x0 + 1) &&
         valid(cell.y0 + 1, cell.x0) && valid(cell.y0 + 1, cell.x0 + 1);
}

// Interpolated (unnormalized) gradient vector and its spatial derivative,
// columns d/du_x and d/du_y.
void sample_field(const GradientField& m, const Cell& c, Eigen::Vector2d& v, Eigen::Matrix2d& dv) {
  const Eigen::Vector2d v00(m.gx(c.y0, c.x0), m.gy(c.y0, c.x0));
  const Eigen::Vector2d v10(m.gx(c.y0, c.x0 + 1), m.gy(c.y0, c.x0 + 1));
  const Eigen::Vector2d v01(m.gx(c.y0 + 1, c.x0), m.gy(c.y0 + 1, c.x0));
  const Eigen::Vector2d v11(m.gx(c.y0 + 1, c.x0 + 1), m.gy(c.y0 + 1, c.x0 + 1));
  const double a = c.a;
  const double b = c.b;
  v = (1 - a) * (1 - b) * v00 + a * (1 - b) * v10 + (1 - a) * b * v01 + a * b * v11;
  dv.col(0) = (1 - b) * (v10 - v00) + b * (v11 - v01);
  dv.col(1) = (1 - a) * (v01 - v00) + a * (v11 - v10);
}

Eigen::Index required_overlap(Eigen::Index reference_count, double fraction) {
  const auto need = static_cast<Eigen::Index>(std::ceil(fraction * static_cast<double>(reference_count)));
  return std::max<Eigen::Index>(1, need);
}

[[noreturn]] void throw_overlap(Eigen::Index got, Eigen::Index need) {
  throw Error(ErrorCode::InsufficientOverlap,
              "only " + std::to_string(got) + " valid pixels, need " + std::to_string(need));
}

Linearization orientation_linearize(const GradientField& f, const GradientField& m,
                                    const WarpParams& w, bool correlation,
                                    const CostOptions& opts, bool with_jacobian) {
  const int dof = w.dof();
  const Eigen::Index capacity = f.count_valid();
  const int rows_per = correlation ? 2 : 1;

  Linearization lin;
  lin.residuals.resize(capacity * rows_per);
  if (with_jacobian) lin.jacobian.resize(capacity * rows_per, dof);
  lin.pixels.reserve(capacity);

  WarpLocal local;
  Cell cell;
  Eigen::Vector2d v;
  Eigen::Matrix2d dv;
  double sum = 0.0;
  Eigen::Index n = 0;
  const Eigen::Index width = f.gx.cols();
  for (Eigen::Index y = 0; y < f.gx.rows(); ++y) {
    for (Eigen::Index x = 0; x < width; ++x) {
      if (!f.valid(y, x)) continue;
      if (!local_warp(w, static_cast<double>(x), static_cast<double>(y), with_jacobian, local)) {
        continue;
      }
      if (!locate_cell(m.valid, local.u, cell)) continue;
      sample_field(m, cell, v, dv);
      const double nv = v.norm();
      if (!(nv >= opts.grad_eps) || nv < opts.min_coherence) continue;
      const Eigen::Vector2d g = v / nv;
      const Eigen::Vector2d gm = local.a.transpose() * g;
      const double ngm = gm.norm();
      if (!(ngm > 1e-12)) continue;
      const Eigen::Vector2d gf(f.gx(y, x), f.gy(y, x));
      const double sin_t = (gf.x() * gm.y() - gf.y() * gm.x()) / ngm;
      const double cos_t = gf.dot(gm) / ngm;
      const Eigen::Vector2d gm_hat = gm / ngm;

      if (correlation) {
        lin.residuals.segment<2>(2 * n) = gm_hat - gf;
        sum += cos_t;
      } else {
        lin.residuals(n) = sin_t;
        sum += sin_t * sin_t;
      }

      if (with_jacobian) {
        const Eigen::Matrix2d dg = (Eigen::Matrix2d::Identity() - g * g.transpose()) * dv / nv;
        const Eigen::Matrix2d proj = (Eigen::Matrix2d::Identity() - gm_hat * gm_hat.transpose()) / ngm;
        const double inv_n2 = 1.0 / (ngm * ngm);
        for (int j = 0; j < dof; ++j) {
          const Eigen::Vector2d dgm = local.da_dp[j].transpose() * g +
                                      local.a.transpose() * (dg * local.du_dp.col(j));
          if (correlation) {
            lin.jacobian.block<2, 1>(2 * n, j) = proj * dgm;
          } else {
            lin.jacobian(n, j) = (gm.x() * dgm.y() - gm.y() * dgm.x()) * inv_n2 * cos_t;
          }
        }
      }
      lin.pixels.push_back(y * width + x);
      ++n;
    }
  }
  const Eigen::Index need = required_overlap(capacity, opts.min_overlap_fraction);
  if (n < need) throw_overlap(n, need);

  lin.n_valid = n;
  lin.residuals.conservativeResize(n * rows_per);
  if (with_jacobian) lin.jacobian.conservativeResize(n * rows_per, dof);
  lin.cost = correlation ? -sum / static_cast<double>(n) : sum / static_cast<double>(n);
  return lin;
}

Linearization ncc_linearize(const Image& fg, const Mask& fmask, const Image& mg,
                            const Mask& mmask, const WarpParams& w, const CostOptions& opts,
                            bool with_jacobian) {
  const int dof = w.dof();
  const Eigen::Index capacity = fmask.count();
  std::vector<double> fv;
  std::vector<double> mv;
  fv.reserve(capacity);
  mv.reserve(capacity);
  Eigen::MatrixXd dm;
  if (with_jacobian) dm.resize(capacity, dof);

  Linearization lin;
  lin.pixels.reserve(capacity);
  WarpLocal local;
  Cell cell;
  const Eigen::Index width = fg.cols();
  for (Eigen::Index y = 0; y < fg.rows(); ++y) {
    for (Eigen::Index x = 0; x < width; ++x) {
      if (!fmask(y, x)) continue;
      if (!local_warp(w, static_cast<double>(x), static_cast<double>(y), with_jacobian, local)) {
        continue;
      }
      if (!locate_cell(mmask, local.u, cell)) continue;
      const double i00 = mg(cell.y0, cell.x0);
      const double i10 = mg(cell.y0, cell.x0 + 1);
      const double i01 = mg(cell.y0 + 1, cell.x0);
      const double i11 = mg(cell.y0 + 1, cell.x0 + 1);
      const double a = cell.a;
      const double b = cell.b;
      const Eigen::Index k = static_cast<Eigen::Index>(fv.size());
      fv.push_back(fg(y, x));
      mv.push_back((1 - a) * (1 - b) * i00 + a * (1 - b) * i10 + (1 - a) * b * i01 + a * b * i11);
      if (with_jacobian) {
        const Eigen::RowVector2d grad((1 - b) * (i10 - i00) + b * (i11 - i01),
                                      (1 - a) * (i01 - i00) + a * (i11 - i10));
        dm.row(k) = grad * local.du_dp.leftCols(dof);
      }
      lin.pixels.push_back(y * width + x);
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(fv.size());
  const Eigen::Index need = required_overlap(capacity, opts.min_overlap_fraction);
  if (n < need) throw_overlap(n, need);

  const Eigen::Map<const Eigen::VectorXd> f(fv.data(), n);
  const Eigen::Map<const Eigen::VectorXd> m(mv.data(), n);
  const Eigen::VectorXd fc = f.array() - f.mean();
  const Eigen::VectorXd mc = m.array() - m.mean();
  const double nf = fc.norm();
  const double nm = mc.norm();
  constexpr double kVarianceFloor = 1e-12;
  if (fc.squaredNorm() / n < kVarianceFloor || mc.squaredNorm() / n < kVarianceFloor) {
    throw Error(ErrorCode::ZeroVariance, "constant intensities over the overlap");
  }
  const Eigen::VectorXd f_hat = fc / nf;
  const Eigen::VectorXd m_hat = mc / nm;
  lin.n_valid = n;
  lin.cost = -f_hat.dot(m_hat);
  lin.residuals = f_hat - m_hat;
  if (with_jacobian) {
    dm.conservativeResize(n, dof);
    Eigen::MatrixXd dmc = dm.rowwise() - dm.colwise().mean();
    const Eigen::RowVectorXd proj = m_hat.transpose() * dmc;
    lin.jacobian = -(dmc - m_hat * proj) / nm;
  }
  return lin;
}

}  // namespace

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::SinSqOrientation: return "sin2_orientation";
    case Objective::CosCorrelation: return "cos_correlation";
    case Objective::NCC: return "ncc";
  }
  return "unknown";
}

Objective objective_from_string(std::string_view name) {
  if (name == "sin2_orientation") return Objective::SinSqOrientation;
  if (name == "cos_correlation") return Objective::CosCorrelation;
  if (name == "ncc") return Objective::NCC;
  throw Error(ErrorCode::InvalidArgument, "unknown objective '" + std::string(name) + "'");
}

CostValue orientation_cost(const GradientField& fixed, const GradientField& moving,
                           const WarpParams& w, const CostOptions& opts) {
  const auto lin = orientation_linearize(fixed, moving, w, false, opts, false);
  return {lin.cost, lin.n_valid};
}

CostValue correlation_cost(const GradientField& fixed, const GradientField& moving,
                           const WarpParams& w, const CostOptions& opts) {
  const auto lin = orientation_linearize(fixed, moving, w, true, opts, false);
  return {lin.cost, lin.n_valid};
}

CostValue ncc_cost(const Image& fixed_gray, const Mask& fixed_mask, const Image& moving_gray,
                   const Mask& moving_mask, const WarpParams& w, const CostOptions& opts) {
  const auto lin = ncc_linearize(fixed_gray, fixed_mask, moving_gray, moving_mask, w, opts, false);
  return {lin.cost, lin.n_valid};
}

CostValue objective_cost(const PyramidLevel& fixed, const PyramidLevel& moving,
                         const WarpParams& w, Objective objective, const CostOptions& opts) {
  const auto lin = linearize(fixed, moving, w, objective, opts, false);
  return {lin.cost, lin.n_valid};
}

Linearization linearize(const PyramidLevel& fixed, const PyramidLevel& moving,
                        const WarpParams& w, Objective objective, const CostOptions& opts,
                        bool with_jacobian) {
  switch (objective) {
    case Objective::SinSqOrientation:
      return orientation_linearize(fixed.gradients, moving.gradients, w, false, opts,
                                   with_jacobian);
    case Objective::CosCorrelation:
      return orientation_linearize(fixed.gradients, moving.gradients, w, true, opts,
                                   with_jacobian);
    case Objective::NCC:
      return ncc_linearize(fixed.gray, fixed.mask, moving.gray, moving.mask, w, opts,
                           with_jacobian);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown objective");
}

}  // namespace fetomosaic
