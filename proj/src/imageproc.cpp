#include "fetomosaic/imageproc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "fetomosaic/error.hpp"

namespace fetomosaic {

namespace {

constexpr std::array<double, 5> gaussian_taps() {
  // exp(-k^2 / 2) for k = -2..2, normalized
  constexpr double e1 = 0.60653065971263342;
  constexpr double e2 = 0.13533528323661270;
  constexpr double sum = 1.0 + 2.0 * e1 + 2.0 * e2;
  return {e2 / sum, e1 / sum, 1.0 / sum, e1 / sum, e2 / sum};
}

// One pass of a separable convolution with zero outside the image.
Image convolve_rows(const Image& in) {
  constexpr auto taps = gaussian_taps();
  const Eigen::Index h = in.rows();
  const Eigen::Index w = in.cols();
  Image out = Image::Zero(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k) {
        const Eigen::Index xx = x + k;
        if (xx >= 0 && xx < w) acc += taps[k + 2] * in(y, xx);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

Image convolve_separable(const Image& in) {
  Image rows = convolve_rows(in);
  Image t = rows.transpose();
  Image cols = convolve_rows(t);
  return cols.transpose();
}

// 1-D squared distance transform of a sampled function (lower envelope of
// parabolas).
void distance_transform_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  const auto intersect = [&f](int p, int q) {
    return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
  };
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = intersect(v[k], q);
    while (s <= z[k]) {
      --k;
      s = intersect(v[k], q);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  d.assign(n, 0.0);
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

Frame Frame::create(int id, int width, int height, std::vector<std::uint8_t> rgb, Mask mask) {
  if (width < kMinFrameSide || height < kMinFrameSide) {
    throw Error(ErrorCode::InvalidArgument, "frames must be at least 16x16");
  }
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw Error(ErrorCode::InvalidArgument, "rgb buffer does not match frame size");
  }
  if (mask.size() == 0) {
    mask = full_mask(width, height);
  } else if (mask.rows() != height || mask.cols() != width) {
    throw Error(ErrorCode::InvalidArgument, "mask size differs from frame size");
  }
  Frame f;
  f.id = id;
  f.width = width;
  f.height = height;
  f.rgb = std::move(rgb);
  f.mask = std::move(mask);
  return f;
}

Image to_grayscale(const Frame& frame) {
  Image gray(frame.height, frame.width);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      gray(y, x) = (0.299 * frame.at(x, y, 0) + 0.587 * frame.at(x, y, 1) +
                    0.114 * frame.at(x, y, 2)) /
                   255.0;
    }
  }
  return gray;
}

Mask full_mask(int width, int height) { return Mask::Constant(height, width, true); }

Mask circular_mask(int width, int height, double cx, double cy, double radius) {
  Mask m(height, width);
  const double r2 = radius * radius;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      m(y, x) = dx * dx + dy * dy <= r2;
    }
  }
  return m;
}

Mask erode(const Mask& mask, int radius) {
  Mask cur = mask;
  const Eigen::Index h = mask.rows();
  const Eigen::Index w = mask.cols();
  for (int r = 0; r < radius; ++r) {
    Mask next = Mask::Constant(h, w, false);
    for (Eigen::Index y = 1; y + 1 < h; ++y) {
      for (Eigen::Index x = 1; x + 1 < w; ++x) {
        next(y, x) = cur(y, x) && cur(y - 1, x) && cur(y + 1, x) && cur(y, x - 1) &&
                     cur(y, x + 1);
      }
    }
    cur = std::move(next);
  }
  return cur;
}

Image masked_gaussian_blur(const Image& image, const Mask& mask) {
  const Image weights = mask.cast<double>();
  const Image num = convolve_separable(image * weights);
  const Image den = convolve_separable(weights);
  Image out = image;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (den(i) > 1e-12) out(i) = num(i) / den(i);
  }
  return out;
}

int max_pyramid_levels(int width, int height) {
  int levels = 0;
  while (width >= kMinPyramidSide && height >= kMinPyramidSide) {
    ++levels;
    width = (width + 1) / 2;
    height = (height + 1) / 2;
  }
  return levels;
}

GradientField compute_gradient_field(const Image& gray, const Mask& mask, double grad_eps,
                                     int level) {
  if (gray.rows() != mask.rows() || gray.cols() != mask.cols()) {
    throw Error(ErrorCode::InvalidArgument, "gradient: image and mask sizes differ");
  }
  const Eigen::Index h = gray.rows();
  const Eigen::Index w = gray.cols();
  GradientField g;
  g.level = level;
  g.gx = Image::Zero(h, w);
  g.gy = Image::Zero(h, w);
  g.valid = erode(mask, 1);
  for (Eigen::Index y = 1; y + 1 < h; ++y) {
    for (Eigen::Index x = 1; x + 1 < w; ++x) {
      if (!g.valid(y, x)) continue;
      const double dx = 0.5 * (gray(y, x + 1) - gray(y, x - 1));
      const double dy = 0.5 * (gray(y + 1, x) - gray(y - 1, x));
      const double mag = std::hypot(dx, dy);
      if (!(mag >= grad_eps)) {
        g.valid(y, x) = false;
        continue;
      }
      g.gx(y, x) = dx / mag;
      g.gy(y, x) = dy / mag;
    }
  }
  return g;
}

Pyramid build_pyramid(const Image& gray, const Mask& mask, int num_levels, double grad_eps) {
  if (num_levels < 1) {
    throw Error(ErrorCode::InvalidArgument, "pyramid needs at least one level");
  }
  if (gray.rows() != mask.rows() || gray.cols() != mask.cols()) {
    throw Error(ErrorCode::InvalidArgument, "pyramid: image and mask sizes differ");
  }
  const int w0 = static_cast<int>(gray.cols());
  const int h0 = static_cast<int>(gray.rows());
  const int possible = max_pyramid_levels(w0, h0);
  if (possible < 1) {
    throw Error(ErrorCode::TooSmallForPyramid, "image smaller than 4x4");
  }
  const int levels = std::min(num_levels, possible);

  Pyramid pyr;
  pyr.requested_levels = num_levels;
  pyr.levels.reserve(levels);
  Image cur = gray;
  Mask cur_mask = mask;
  for (int k = 0; k < levels; ++k) {
    if (k > 0) {
      const Image blurred = masked_gaussian_blur(cur, cur_mask);
      const Eigen::Index h = (cur.rows() + 1) / 2;
      const Eigen::Index w = (cur.cols() + 1) / 2;
      Image next(h, w);
      Mask next_mask(h, w);
      for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
          next(y, x) = blurred(2 * y, 2 * x);
          bool ok = true;
          for (Eigen::Index cy = 2 * y; cy < std::min(2 * y + 2, cur.rows()); ++cy) {
            for (Eigen::Index cx = 2 * x; cx < std::min(2 * x + 2, cur.cols()); ++cx) {
              ok = ok && cur_mask(cy, cx);
            }
          }
          next_mask(y, x) = ok;
        }
      }
      cur = std::move(next);
      cur_mask = std::move(next_mask);
    }
    PyramidLevel lvl;
    lvl.gray = cur;
    lvl.mask = cur_mask;
    lvl.gradients = compute_gradient_field(cur, cur_mask, grad_eps, k);
    pyr.levels.push_back(std::move(lvl));
  }
  return pyr;
}

Pyramid build_pyramid(const Frame& frame, int num_levels, double grad_eps) {
  return build_pyramid(to_grayscale(frame), frame.mask, num_levels, grad_eps);
}

Image distance_to_mask_boundary(const Mask& mask) {
  // Pad by one invalid pixel so the image border counts as boundary.
  const Eigen::Index h = mask.rows() + 2;
  const Eigen::Index w = mask.cols() + 2;
  constexpr double inf = 1e20;
  Image f = Image::Constant(h, w, 0.0);
  for (Eigen::Index y = 0; y < mask.rows(); ++y) {
    for (Eigen::Index x = 0; x < mask.cols(); ++x) {
      f(y + 1, x + 1) = mask(y, x) ? inf : 0.0;
    }
  }
  std::vector<double> line;
  std::vector<double> out;
  for (Eigen::Index x = 0; x < w; ++x) {
    line.resize(h);
    for (Eigen::Index y = 0; y < h; ++y) line[y] = f(y, x);
    distance_transform_1d(line, out);
    for (Eigen::Index y = 0; y < h; ++y) f(y, x) = out[y];
  }
  for (Eigen::Index y = 0; y < h; ++y) {
    line.resize(w);
    for (Eigen::Index x = 0; x < w; ++x) line[x] = f(y, x);
    distance_transform_1d(line, out);
    for (Eigen::Index x = 0; x < w; ++x) f(y, x) = out[x];
  }
  Image d(mask.rows(), mask.cols());
  for (Eigen::Index y = 0; y < mask.rows(); ++y) {
    for (Eigen::Index x = 0; x < mask.cols(); ++x) {
      d(y, x) = mask(y, x) ? std::sqrt(f(y + 1, x + 1)) : 0.0;
    }
  }
  return d;
}

}  // namespace fetomosaic
