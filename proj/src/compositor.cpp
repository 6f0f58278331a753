#include "fetomosaic/compositor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "fetomosaic/error.hpp"

namespace fetomosaic {

namespace {

std::array<Point2, 4> frame_corners(const Frame& f) {
  const double w = f.width - 1;
  const double h = f.height - 1;
  return {Point2(0, 0), Point2(w, 0), Point2(0, h), Point2(w, h)};
}

struct Sample {
  std::array<Eigen::Index, 4> offset;  // y * width + x
  std::array<double, 4> weight;
};

// Bilinear stencil at x; every corner with a nonzero weight must be valid.
bool stencil(const Frame& f, const Point2& x, Sample& s) {
  if (!(x.x() >= 0.0 && x.y() >= 0.0 && x.x() <= f.width - 1 && x.y() <= f.height - 1)) {
    return false;
  }
  const int x0 = std::min(static_cast<int>(std::floor(x.x())), f.width - 2);
  const int y0 = std::min(static_cast<int>(std::floor(x.y())), f.height - 2);
  const double a = x.x() - x0;
  const double b = x.y() - y0;
  const std::array<int, 4> xs = {x0, x0 + 1, x0, x0 + 1};
  const std::array<int, 4> ys = {y0, y0, y0 + 1, y0 + 1};
  s.weight = {(1 - a) * (1 - b), a * (1 - b), (1 - a) * b, a * b};
  for (int k = 0; k < 4; ++k) {
    if (s.weight[k] > 0.0 && !f.mask(ys[k], xs[k])) return false;
    s.offset[k] = static_cast<Eigen::Index>(ys[k]) * f.width + xs[k];
  }
  return true;
}

}  // namespace

std::string_view to_string(BlendMode mode) {
  return mode == BlendMode::LastWrite ? "last_write" : "feather";
}

BlendMode blend_mode_from_string(std::string_view name) {
  if (name == "last_write") return BlendMode::LastWrite;
  if (name == "feather") return BlendMode::Feather;
  throw Error(ErrorCode::InvalidArgument, "unknown blend mode '" + std::string(name) + "'");
}

std::vector<std::uint8_t> MosaicCanvas::rgba() const {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(width()) * height() * 4, 0);
  auto quant = [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
  };
  std::size_t k = 0;
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x, k += 4) {
      if (!(weight(y, x) > 0.0)) continue;
      out[k] = quant(r(y, x));
      out[k + 1] = quant(g(y, x));
      out[k + 2] = quant(b(y, x));
      out[k + 3] = 255;
    }
  }
  return out;
}

Extent mosaic_extent(const std::vector<Frame>& frames, const std::vector<WarpParams>& globals,
                     const std::vector<int>& indices) {
  if (indices.empty()) throw Error(ErrorCode::EmptyMosaic, "no frame to place");
  Extent e{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (int i : indices) {
    const WarpParams to_mosaic = invert(globals[i]);
    for (const auto& c : frame_corners(frames[i])) {
      const Point2 p = apply_warp(to_mosaic, c);
      e.min_x = std::min(e.min_x, p.x());
      e.min_y = std::min(e.min_y, p.y());
      e.max_x = std::max(e.max_x, p.x());
      e.max_y = std::max(e.max_y, p.y());
    }
  }
  e.min_x -= 1.0;
  e.min_y -= 1.0;
  e.max_x += 1.0;
  e.max_y += 1.0;
  return e;
}

MosaicCanvas composite(const std::vector<Frame>& frames, const std::vector<WarpParams>& globals,
                       BlendMode mode, int stride, const std::vector<bool>& include) {
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
  if (globals.size() != frames.size() || (!include.empty() && include.size() != frames.size())) {
    throw Error(ErrorCode::LengthMismatch, "frames, globals and flags must have equal length");
  }
  std::vector<int> chosen;
  int accepted = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!include.empty() && !include[i]) continue;
    if (accepted++ % stride == 0) chosen.push_back(static_cast<int>(i));
  }
  if (chosen.empty()) throw Error(ErrorCode::EmptyMosaic, "no accepted frame to composite");

  MosaicCanvas m;
  m.extent = mosaic_extent(frames, globals, chosen);
  m.origin_x = static_cast<int>(std::floor(m.extent.min_x));
  m.origin_y = static_cast<int>(std::floor(m.extent.min_y));
  const int w = static_cast<int>(std::ceil(m.extent.max_x)) - m.origin_x + 1;
  const int h = static_cast<int>(std::ceil(m.extent.max_y)) - m.origin_y + 1;
  m.r = Image::Zero(h, w);
  m.g = Image::Zero(h, w);
  m.b = Image::Zero(h, w);
  m.weight = Image::Zero(h, w);

  Sample s;
  for (int i : chosen) {
    const Frame& f = frames[i];
    const Image feather = mode == BlendMode::Feather ? distance_to_mask_boundary(f.mask) : Image();
    const Extent box = mosaic_extent(frames, globals, {i});
    const int x0 = std::max(0, static_cast<int>(std::floor(box.min_x)) - m.origin_x);
    const int y0 = std::max(0, static_cast<int>(std::floor(box.min_y)) - m.origin_y);
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(box.max_x)) - m.origin_x);
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(box.max_y)) - m.origin_y);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Point2 p = apply_warp(globals[i], Point2(x + m.origin_x, y + m.origin_y));
        if (!stencil(f, p, s)) continue;
        std::array<double, 3> rgb = {0.0, 0.0, 0.0};
        double wt = 0.0;
        for (int k = 0; k < 4; ++k) {
          if (s.weight[k] == 0.0) continue;
          const std::size_t base = static_cast<std::size_t>(s.offset[k]) * 3;
          for (int c = 0; c < 3; ++c) rgb[c] += s.weight[k] * f.rgb[base + c];
          if (mode == BlendMode::Feather) wt += s.weight[k] * feather.data()[s.offset[k]];
        }
        if (mode == BlendMode::LastWrite) {
          m.r(y, x) = rgb[0];
          m.g(y, x) = rgb[1];
          m.b(y, x) = rgb[2];
          m.weight(y, x) = 1.0;
        } else if (wt > 0.0) {
          m.r(y, x) += wt * rgb[0];
          m.g(y, x) += wt * rgb[1];
          m.b(y, x) += wt * rgb[2];
          m.weight(y, x) += wt;
        }
      }
    }
  }
  if (mode == BlendMode::Feather) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double wt = m.weight(y, x);
        if (wt > 0.0) {
          m.r(y, x) /= wt;
          m.g(y, x) /= wt;
          m.b(y, x) /= wt;
        }
      }
    }
  }
  return m;
}

}  // namespace fetomosaic
