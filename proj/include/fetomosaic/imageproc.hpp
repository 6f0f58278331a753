#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace fetomosaic {

// Row-major images: rows are y, columns are x.
template <typename Scalar>
using ImageT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Image = ImageT<double>;
using Mask = ImageT<bool>;

inline constexpr double kDefaultGradEps = 1e-4;
inline constexpr int kDefaultPyramidLevels = 6;
inline constexpr int kMinFrameSide = 16;
inline constexpr int kMinPyramidSide = 4;

// One video frame: interleaved 8-bit RGB plus the field-of-view mask.
struct Frame {
  int id = 0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
  Mask mask;

  // Validates sizes; an empty mask means the whole frame is valid.
  static Frame create(int id, int width, int height, std::vector<std::uint8_t> rgb,
                      Mask mask = Mask());

  std::uint8_t at(int x, int y, int channel) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + channel];
  }
};

// Unit gradient vectors where valid; zero elsewhere.
struct GradientField {
  Image gx;
  Image gy;
  Mask valid;
  int level = 0;

  int width() const { return static_cast<int>(gx.cols()); }
  int height() const { return static_cast<int>(gx.rows()); }
  Eigen::Index count_valid() const { return valid.count(); }
};

struct PyramidLevel {
  Image gray;
  Mask mask;
  GradientField gradients;

  int width() const { return static_cast<int>(gray.cols()); }
  int height() const { return static_cast<int>(gray.rows()); }
};

// Level 0 is the full-resolution image; the coarsest level is last.
struct Pyramid {
  std::vector<PyramidLevel> levels;
  int requested_levels = 0;

  int num_levels() const { return static_cast<int>(levels.size()); }
  bool clamped() const { return num_levels() < requested_levels; }
};

// Luminance 0.299 R + 0.587 G + 0.114 B on [0, 1].
Image to_grayscale(const Frame& frame);

Mask full_mask(int width, int height);
Mask circular_mask(int width, int height, double cx, double cy, double radius);

// Erodes with a 3x3 cross `radius` times; pixels on the image border are
// always removed.
Mask erode(const Mask& mask, int radius = 1);

// Separable 5-tap Gaussian (sigma = 1) as a normalized convolution, so that
// pixels outside the mask do not bleed into valid ones.
Image masked_gaussian_blur(const Image& image, const Mask& mask);

// Largest level count for which the coarsest level stays >= 4x4.
int max_pyramid_levels(int width, int height);

GradientField compute_gradient_field(const Image& gray, const Mask& mask,
                                     double grad_eps = kDefaultGradEps, int level = 0);

Pyramid build_pyramid(const Image& gray, const Mask& mask, int num_levels = kDefaultPyramidLevels,
                      double grad_eps = kDefaultGradEps);
Pyramid build_pyramid(const Frame& frame, int num_levels = kDefaultPyramidLevels,
                      double grad_eps = kDefaultGradEps);

// Euclidean distance from each valid pixel to the nearest invalid pixel or
// to the outside of the image (0 on invalid pixels).
Image distance_to_mask_boundary(const Mask& mask);

}  // namespace fetomosaic
