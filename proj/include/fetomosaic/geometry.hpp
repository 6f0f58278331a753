#pragma once

// Planar warp algebra. Warps are stored as the 8 coefficients of
//
//   w(x, y) = ((p1 x + p2 y + p3) / (p7 x + p8 y + 1),
//              (p4 x + p5 y + p6) / (p7 x + p8 y + 1))
//
// and templated on the scalar type so the same code runs on doubles and on
// Eigen::AutoDiffScalar (used by the bundle adjuster for exact Jacobians).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <type_traits>

#include "fetomosaic/error.hpp"

namespace fetomosaic {

enum class WarpKind { Affine, Homography };

inline std::string_view to_string(WarpKind kind) {
  return kind == WarpKind::Affine ? "affine" : "homography";
}

inline WarpKind warp_kind_from_string(std::string_view name) {
  if (name == "affine") return WarpKind::Affine;
  if (name == "homography") return WarpKind::Homography;
  throw Error(ErrorCode::InvalidArgument, "unknown warp kind '" + std::string(name) + "'");
}

namespace detail {

template <typename T>
double scalar_value(const T& v) {
  if constexpr (std::is_arithmetic_v<T>) {
    return static_cast<double>(v);
  } else {
    return static_cast<double>(v.value());
  }
}

}  // namespace detail

template <typename Scalar>
class Warp {
 public:
  using Params = Eigen::Matrix<Scalar, 8, 1>;
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  using Point = Eigen::Matrix<Scalar, 2, 1>;

  static constexpr double kMinDeterminant = 1e-12;

  Warp() : p_(identity_params()), kind_(WarpKind::Affine) {}

  Warp(const Params& p, WarpKind kind) : p_(p), kind_(kind) { validate(); }

  static Warp identity(WarpKind kind = WarpKind::Affine) {
    return Warp(identity_params(), kind);
  }

  static Warp translation(Scalar tx, Scalar ty) {
    return affine(Scalar(1), Scalar(0), tx, Scalar(0), Scalar(1), ty);
  }

  // Isotropic scaling about the origin.
  static Warp scaling(Scalar s) {
    return affine(s, Scalar(0), Scalar(0), Scalar(0), s, Scalar(0));
  }

  static Warp affine(Scalar a11, Scalar a12, Scalar tx, Scalar a21, Scalar a22, Scalar ty) {
    Params p;
    p << a11, a12, tx, a21, a22, ty, Scalar(0), Scalar(0);
    return Warp(p, WarpKind::Affine);
  }

  // x -> s R(angle) x + t
  static Warp similarity(Scalar scale, Scalar angle, Scalar tx, Scalar ty) {
    using std::cos;
    using std::sin;
    const Scalar c = scale * cos(angle);
    const Scalar s = scale * sin(angle);
    return affine(c, -s, tx, s, c, ty);
  }

  // Builds the canonical representative of a 3x3 matrix (bottom-right 1).
  static Warp from_matrix(const Matrix3& m, WarpKind kind) {
    using std::abs;
    if (abs(detail::scalar_value(m(2, 2))) < 1e-12) {
      throw Error(ErrorCode::DenominatorNearZero, "homogeneous scale entry is ~0");
    }
    const Scalar inv = Scalar(1) / m(2, 2);
    Params p;
    p << m(0, 0) * inv, m(0, 1) * inv, m(0, 2) * inv, m(1, 0) * inv, m(1, 1) * inv,
        m(1, 2) * inv, m(2, 0) * inv, m(2, 1) * inv;
    if (kind == WarpKind::Affine) {
      p(6) = Scalar(0);
      p(7) = Scalar(0);
    }
    return Warp(p, kind);
  }

  const Params& params() const { return p_; }
  const Scalar& operator[](Eigen::Index i) const { return p_(i); }
  WarpKind kind() const { return kind_; }
  bool is_affine() const { return kind_ == WarpKind::Affine; }

  // Number of free coefficients for this kind (6 or 8).
  int dof() const { return kind_ == WarpKind::Affine ? 6 : 8; }

  Matrix3 matrix() const {
    Matrix3 m;
    m << p_(0), p_(1), p_(2), p_(3), p_(4), p_(5), p_(6), p_(7), Scalar(1);
    return m;
  }

  template <typename Other>
  Warp<Other> cast() const {
    return Warp<Other>(p_.template cast<Other>(), kind_);
  }

 private:
  static Params identity_params() {
    Params p = Params::Zero();
    p(0) = Scalar(1);
    p(4) = Scalar(1);
    return p;
  }

  void validate() const {
    for (Eigen::Index i = 0; i < 8; ++i) {
      if (!std::isfinite(detail::scalar_value(p_(i)))) {
        throw Error(ErrorCode::InvalidArgument, "warp coefficient is not finite");
      }
    }
    if (kind_ == WarpKind::Affine &&
        (detail::scalar_value(p_(6)) != 0.0 || detail::scalar_value(p_(7)) != 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "affine warp requires p7 == p8 == 0");
    }
    const double det = detail::scalar_value(matrix().determinant());
    if (!(std::abs(det) > kMinDeterminant)) {
      throw Error(ErrorCode::SingularWarp, "warp matrix is not invertible");
    }
  }

  Params p_;
  WarpKind kind_;
};

using WarpParams = Warp<double>;
using Point2 = Eigen::Vector2d;

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> apply_warp(const Warp<Scalar>& w,
                                       const Eigen::Matrix<Scalar, 2, 1>& x) {
  const Scalar denom = w[6] * x(0) + w[7] * x(1) + Scalar(1);
  if (!(std::abs(detail::scalar_value(denom)) > 1e-9)) {
    throw Error(ErrorCode::DenominatorNearZero, "point lies on the projective horizon");
  }
  return Eigen::Matrix<Scalar, 2, 1>((w[0] * x(0) + w[1] * x(1) + w[2]) / denom,
                                     (w[3] * x(0) + w[4] * x(1) + w[5]) / denom);
}

// Returns a ∘ b, i.e. x -> a(b(x)).
template <typename Scalar>
Warp<Scalar> compose(const Warp<Scalar>& a, const Warp<Scalar>& b) {
  const WarpKind kind =
      a.is_affine() && b.is_affine() ? WarpKind::Affine : WarpKind::Homography;
  return Warp<Scalar>::from_matrix(a.matrix() * b.matrix(), kind);
}

template <typename Scalar>
Warp<Scalar> invert(const Warp<Scalar>& w) {
  if (w.is_affine()) {
    const Scalar det = w[0] * w[4] - w[1] * w[3];
    if (!(std::abs(detail::scalar_value(det)) > Warp<Scalar>::kMinDeterminant)) {
      throw Error(ErrorCode::SingularWarp, "affine part is singular");
    }
    const Scalar i11 = w[4] / det;
    const Scalar i12 = -w[1] / det;
    const Scalar i21 = -w[3] / det;
    const Scalar i22 = w[0] / det;
    return Warp<Scalar>::affine(i11, i12, -(i11 * w[2] + i12 * w[5]), i21, i22,
                                -(i21 * w[2] + i22 * w[5]));
  }
  const auto m = w.matrix();
  const Scalar det = m.determinant();
  if (!(std::abs(detail::scalar_value(det)) > Warp<Scalar>::kMinDeterminant)) {
    throw Error(ErrorCode::SingularWarp, "homography is singular");
  }
  typename Warp<Scalar>::Matrix3 adj;
  adj(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  adj(0, 1) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
  adj(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
  adj(1, 0) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
  adj(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
  adj(1, 2) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
  adj(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
  adj(2, 1) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
  adj(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  // The adjugate is the inverse up to scale; from_matrix renormalizes anyway.
  return Warp<Scalar>::from_matrix(adj, WarpKind::Homography);
}

// Reference points on a regular lattice with pixel centers at integer
// coordinates: {0, step, 2 step, ...} x {0, step, ...} inside [0,w) x [0,h).
class RefGrid {
 public:
  RefGrid(int width, int height, int step = 3) : width_(width), height_(height), step_(step) {
    if (width <= 0 || height <= 0 || step <= 0) {
      throw Error(ErrorCode::InvalidArgument, "grid needs positive width, height and step");
    }
    const int nx = (width - 1) / step + 1;
    const int ny = (height - 1) / step + 1;
    points_.resize(2, static_cast<Eigen::Index>(nx) * ny);
    Eigen::Index k = 0;
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        points_.col(k++) = Eigen::Vector2d(ix * step, iy * step);
      }
    }
  }

  const Eigen::Matrix2Xd& points() const { return points_; }
  Eigen::Index size() const { return points_.cols(); }
  int width() const { return width_; }
  int height() const { return height_; }
  int step() const { return step_; }

 private:
  int width_;
  int height_;
  int step_;
  Eigen::Matrix2Xd points_;
};

// Maximum Euclidean deviation between two warps over the grid points.
template <typename Scalar>
Scalar warp_distance(const Warp<Scalar>& w1, const Warp<Scalar>& w2, const RefGrid& grid) {
  using std::max;
  using std::sqrt;
  Scalar worst(0);
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const Eigen::Matrix<Scalar, 2, 1> x = grid.points().col(k).template cast<Scalar>();
    const Scalar d = (apply_warp(w1, x) - apply_warp(w2, x)).norm();
    worst = max(worst, d);
  }
  return worst;
}

}  // namespace fetomosaic
