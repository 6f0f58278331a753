#pragma once

// Mosaic rendering: frames are inverse-warped into mosaic (frame 0)
// coordinates with bilinear sampling.

#include <cstdint>
#include <string_view>
#include <vector>

#include "fetomosaic/geometry.hpp"
#include "fetomosaic/imageproc.hpp"

namespace fetomosaic {

enum class BlendMode { LastWrite, Feather };

std::string_view to_string(BlendMode mode);
BlendMode blend_mode_from_string(std::string_view name);

struct Extent {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;
};

struct MosaicCanvas {
  Extent extent;
  // Mosaic coordinates of pixel (0, 0).
  int origin_x = 0;
  int origin_y = 0;
  Image r;
  Image g;
  Image b;
  Image weight;

  int width() const { return static_cast<int>(weight.cols()); }
  int height() const { return static_cast<int>(weight.rows()); }
  // Interleaved RGBA, alpha 0 where nothing was drawn.
  std::vector<std::uint8_t> rgba() const;
};

// Union bounding box of the frames' corners mapped by W_i^-1, padded by 1 px.
Extent mosaic_extent(const std::vector<Frame>& frames, const std::vector<WarpParams>& globals,
                     const std::vector<int>& indices);

// Frames flagged in `include` (empty means all) are taken in order and every
// stride-th of them is drawn.
MosaicCanvas composite(const std::vector<Frame>& frames, const std::vector<WarpParams>& globals,
                       BlendMode mode, int stride = 5, const std::vector<bool>& include = {});

}  // namespace fetomosaic
