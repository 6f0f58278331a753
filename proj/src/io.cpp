#include "fetomosaic/io.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>
#include <string>

#include "fetomosaic/error.hpp"

namespace fetomosaic {

namespace {

std::vector<std::uint8_t> read_png(const std::filesystem::path& path, std::uint32_t format,
                                   int& width, int& height) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::Io, "cannot read " + path.string() + ": " + image.message);
  }
  image.format = format;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::Io, "cannot decode " + path.string() + ": " + image.message);
  }
  width = static_cast<int>(image.width);
  height = static_cast<int>(image.height);
  return pixels;
}

void write_png(const std::filesystem::path& path, std::uint32_t format, int width, int height,
               const std::uint8_t* data) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, data, 0, nullptr)) {
    throw Error(ErrorCode::Io, "cannot write " + path.string() + ": " + image.message);
  }
}

void check_size(std::size_t got, int width, int height, int channels) {
  if (width <= 0 || height <= 0 ||
      got != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * channels) {
    throw Error(ErrorCode::InvalidArgument, "pixel buffer does not match the image size");
  }
}

}  // namespace

Frame read_frame_png(const std::filesystem::path& path, int id, const Mask& mask) {
  int w = 0;
  int h = 0;
  auto rgb = read_png(path, PNG_FORMAT_RGB, w, h);
  return Frame::create(id, w, h, std::move(rgb), mask);
}

void write_frame_png(const std::filesystem::path& path, const Frame& frame) {
  check_size(frame.rgb.size(), frame.width, frame.height, 3);
  write_png(path, PNG_FORMAT_RGB, frame.width, frame.height, frame.rgb.data());
}

void write_rgba_png(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& rgba) {
  check_size(rgba.size(), width, height, 4);
  write_png(path, PNG_FORMAT_RGBA, width, height, rgba.data());
}

void write_gray_png(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& gray) {
  check_size(gray.size(), width, height, 1);
  write_png(path, PNG_FORMAT_GRAY, width, height, gray.data());
}

Mask read_mask_png(const std::filesystem::path& path) {
  int w = 0;
  int h = 0;
  const auto gray = read_png(path, PNG_FORMAT_GRAY, w, h);
  Mask m(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m(y, x) = gray[static_cast<std::size_t>(y) * w + x] != 0;
  }
  return m;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  const int w = static_cast<int>(mask.cols());
  const int h = static_cast<int>(mask.rows());
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) gray[static_cast<std::size_t>(y) * w + x] = mask(y, x) ? 255 : 0;
  }
  write_gray_png(path, w, h, gray);
}

std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::Io, dir.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

}  // namespace fetomosaic
