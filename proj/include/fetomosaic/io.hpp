#pragma once

// PNG frames, masks and images on disk.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fetomosaic/imageproc.hpp"

namespace fetomosaic {

// Any PNG is converted to 8-bit RGB. An empty mask means all pixels valid.
Frame read_frame_png(const std::filesystem::path& path, int id, const Mask& mask = Mask());

void write_frame_png(const std::filesystem::path& path, const Frame& frame);

void write_rgba_png(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& rgba);

void write_gray_png(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& gray);

// Nonzero pixels are valid.
Mask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

// *.png files in `dir`, sorted by file name.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir);

}  // namespace fetomosaic
