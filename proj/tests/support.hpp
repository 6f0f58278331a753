#pragma once

// Small helpers shared by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fetomosaic/costs.hpp"
#include "fetomosaic/geometry.hpp"
#include "fetomosaic/imageproc.hpp"
#include "fetomosaic/synth.hpp"

namespace testsupport {

using namespace fetomosaic;

// Smoothstep-interpolated lattice noise on [0, 1].
inline Image value_noise(int width, int height, double cell, std::mt19937_64& rng) {
  const int nx = static_cast<int>(std::ceil(width / cell)) + 2;
  const int ny = static_cast<int>(std::ceil(height / cell)) + 2;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Eigen::MatrixXd lattice(ny, nx);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) lattice(j, i) = uni(rng);
  auto fade = [](double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); };
  Image out(height, width);
  for (int y = 0; y < height; ++y) {
    const double gy = y / cell;
    const int j = static_cast<int>(gy);
    const double ty = fade(gy - j);
    for (int x = 0; x < width; ++x) {
      const double gx = x / cell;
      const int i = static_cast<int>(gx);
      const double tx = fade(gx - i);
      const double top = lattice(j, i) * (1 - tx) + lattice(j, i + 1) * tx;
      const double bot = lattice(j + 1, i) * (1 - tx) + lattice(j + 1, i + 1) * tx;
      out(y, x) = top * (1 - ty) + bot * ty;
    }
  }
  return out;
}

// Two octaves of noise; gradients are nonzero almost everywhere.
inline Image smooth_image(int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Image a = value_noise(width, height, 12.0, rng);
  Image b = value_noise(width, height, 5.0, rng);
  return 0.6 * a + 0.4 * b;
}

inline Frame frame_from_gray(const Image& gray, int id = 0, const Mask& mask = Mask()) {
  const int w = static_cast<int>(gray.cols());
  const int h = static_cast<int>(gray.rows());
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto v = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(gray(y, x), 0.0, 1.0)));
      for (int c = 0; c < 3; ++c) rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c] = v;
    }
  }
  return Frame::create(id, w, h, std::move(rgb), mask);
}

inline Frame constant_frame(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b,
                            int id = 0) {
  std::vector<std::uint8_t> rgb;
  rgb.reserve(static_cast<std::size_t>(w) * h * 3);
  for (int k = 0; k < w * h; ++k) {
    rgb.push_back(r);
    rgb.push_back(g);
    rgb.push_back(b);
  }
  return Frame::create(id, w, h, std::move(rgb));
}

// Warp about the frame center: x -> c + s R (x - c) + t.
inline WarpParams centered_similarity(int size, double scale, double angle, double tx, double ty) {
  const double c = 0.5 * size;
  return compose(WarpParams::translation(c, c),
                 compose(WarpParams::similarity(scale, angle, tx, ty),
                         WarpParams::translation(-c, -c)));
}

inline WarpParams random_affine(std::mt19937_64& rng, double linear = 0.1, double shift = 5.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  return WarpParams::affine(1 + linear * n(rng), linear * n(rng), shift * n(rng), linear * n(rng),
                            1 + linear * n(rng), shift * n(rng));
}

inline WarpParams random_homography(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  WarpParams::Params p;
  p << 1 + 0.1 * n(rng), 0.1 * n(rng), 5 * n(rng), 0.1 * n(rng), 1 + 0.1 * n(rng), 5 * n(rng),
      1e-4 * n(rng), 1e-4 * n(rng);
  return WarpParams(p, WarpKind::Homography);
}

// A fixed/moving pair cut from a canvas with a known relative warp mapping
// fixed pixels into the moving frame.
struct FramePair {
  Frame fixed;
  Frame moving;
  WarpParams truth;
};

inline FramePair render_pair(const ColorImage& canvas, const WarpParams& fixed_to_canvas,
                             const WarpParams& rel, int size, const Mask& fov,
                             const FramePerturbation& pf = {}, const FramePerturbation& pm = {}) {
  const WarpParams moving_to_canvas = compose(fixed_to_canvas, invert(rel));
  return {render_frame(canvas, fixed_to_canvas, size, size, 0, fov, pf),
          render_frame(canvas, moving_to_canvas, size, size, 1, fov, pm), rel};
}

// Central differences (h = 1e-6) of the residual vector. The residuals are
// only piecewise smooth: samples whose stencil changes bilinear cell or
// drops out of the sample set are left out and counted in `skipped`.
struct FiniteDifferenceCheck {
  double worst_relative = 0.0;  // max over columns of max|J - J_fd| / max|J_fd|
  Eigen::Index compared = 0;
  Eigen::Index skipped = 0;
};

inline FiniteDifferenceCheck check_jacobian(const PyramidLevel& f, const PyramidLevel& m,
                                            const WarpParams& w, Objective obj) {
  const double h = 1e-6;
  const Linearization ref = linearize(f, m, w, obj);
  const Eigen::Index rows_per = ref.n_valid ? ref.residuals.size() / ref.n_valid : 1;
  const int width = f.width();
  std::vector<bool> keep(ref.pixels.size(), true);
  Eigen::MatrixXd fd(ref.residuals.size(), w.dof());
  for (int k = 0; k < w.dof(); ++k) {
    WarpParams::Params pp = w.params();
    WarpParams::Params pm = w.params();
    pp(k) += h;
    pm(k) -= h;
    const WarpParams wp(pp, w.kind());
    const WarpParams wm(pm, w.kind());
    const Linearization a = linearize(f, m, wp, obj, {}, false);
    const Linearization b = linearize(f, m, wm, obj, {}, false);
    // NCC residuals depend on every sample through the means, so the whole
    // set has to match.
    const bool global = obj == Objective::NCC;
    if (global && (a.pixels != ref.pixels || b.pixels != ref.pixels)) {
      keep.assign(keep.size(), false);
      break;
    }
    std::size_t ia = 0, ib = 0;
    for (std::size_t s = 0; s < ref.pixels.size(); ++s) {
      const Eigen::Index px = ref.pixels[s];
      while (ia < a.pixels.size() && a.pixels[ia] < px) ++ia;
      while (ib < b.pixels.size() && b.pixels[ib] < px) ++ib;
      const bool in_a = ia < a.pixels.size() && a.pixels[ia] == px;
      const bool in_b = ib < b.pixels.size() && b.pixels[ib] == px;
      const Point2 x(static_cast<double>(px % width), static_cast<double>(px / width));
      const Point2 ua = apply_warp(wp, x);
      const Point2 ub = apply_warp(wm, x);
      const bool same_cell = std::floor(ua.x()) == std::floor(ub.x()) &&
                             std::floor(ua.y()) == std::floor(ub.y());
      if (!in_a || !in_b || !same_cell) {
        keep[s] = false;
        continue;
      }
      for (Eigen::Index r = 0; r < rows_per; ++r) {
        fd(s * rows_per + r, k) = (a.residuals(ia * rows_per + r) - b.residuals(ib * rows_per + r)) / (2 * h);
      }
    }
  }
  FiniteDifferenceCheck out;
  for (bool k : keep) (k ? out.compared : out.skipped)++;
  for (int k = 0; k < w.dof(); ++k) {
    double scale = 0.0, err = 0.0;
    for (std::size_t s = 0; s < keep.size(); ++s) {
      if (!keep[s]) continue;
      for (Eigen::Index r = 0; r < rows_per; ++r) {
        const Eigen::Index i = static_cast<Eigen::Index>(s) * rows_per + r;
        scale = std::max(scale, std::abs(fd(i, k)));
        err = std::max(err, std::abs(fd(i, k) - ref.jacobian(i, k)));
      }
    }
    if (scale > 0.0) out.worst_relative = std::max(out.worst_relative, err / scale);
  }
  return out;
}

}  // namespace testsupport
