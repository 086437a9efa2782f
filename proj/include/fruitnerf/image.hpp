#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace fruitnerf {

// Row-major H x W x 3 float image, values in [0, 1].
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0.0f) {}

  float* at(int x, int y) { return &data[(static_cast<size_t>(y) * width + x) * 3]; }
  const float* at(int x, int y) const { return &data[(static_cast<size_t>(y) * width + x) * 3]; }
};

// Row-major H x W binary mask, values in {0, 1}.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h, 0) {}

  std::uint8_t& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
  size_t count() const {
    size_t n = 0;
    for (auto v : data) n += v;
    return n;
  }
};

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 8-bit PNG I/O. RGB is quantized with round-to-nearest; masks are stored as
// grayscale 0/255 and read back with a 128 threshold.
void write_png_rgb(const std::filesystem::path& path, const RgbImage& img);
void write_png_mask(const std::filesystem::path& path, const Mask& mask);
RgbImage read_png_rgb(const std::filesystem::path& path);
Mask read_png_mask(const std::filesystem::path& path);

}  // namespace fruitnerf
