#include "fruitnerf/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace fruitnerf {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw ImageIoError("cannot open " + path.string());
  return f;
}

void write_png(const std::filesystem::path& path, int width, int height, int color_type,
               const std::vector<png_byte>& pixels, int channels) {
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw ImageIoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(&pixels[static_cast<size_t>(y) * width * channels]));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Reads any 8-bit PNG, expanded to `channels` channels (1 = gray, 3 = RGB).
std::vector<png_byte> read_png(const std::filesystem::path& path, int channels, int& width,
                               int& height) {
  auto file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ImageIoError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw ImageIoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("failed reading " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool is_gray = !(color & PNG_COLOR_MASK_COLOR) && color != PNG_COLOR_TYPE_PALETTE;
  if (channels == 3 && is_gray) png_set_gray_to_rgb(png);
  if (channels == 1 && !is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);

  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  std::vector<png_byte> pixels(static_cast<size_t>(width) * height * channels);
  for (int y = 0; y < height; ++y) {
    png_read_row(png, &pixels[static_cast<size_t>(y) * width * channels], nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

png_byte quantize(float v) {
  const float c = std::fmin(1.0f, std::fmax(0.0f, v));
  return static_cast<png_byte>(std::lround(c * 255.0f));
}

}  // namespace

void write_png_rgb(const std::filesystem::path& path, const RgbImage& img) {
  std::vector<png_byte> px(img.data.size());
  for (size_t i = 0; i < px.size(); ++i) px[i] = quantize(img.data[i]);
  write_png(path, img.width, img.height, PNG_COLOR_TYPE_RGB, px, 3);
}

void write_png_mask(const std::filesystem::path& path, const Mask& mask) {
  std::vector<png_byte> px(mask.data.size());
  for (size_t i = 0; i < px.size(); ++i) px[i] = mask.data[i] ? 255 : 0;
  write_png(path, mask.width, mask.height, PNG_COLOR_TYPE_GRAY, px, 1);
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto px = read_png(path, 3, w, h);
  RgbImage img(w, h);
  for (size_t i = 0; i < px.size(); ++i) img.data[i] = static_cast<float>(px[i]) / 255.0f;
  return img;
}

Mask read_png_mask(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto px = read_png(path, 1, w, h);
  Mask mask(w, h);
  for (size_t i = 0; i < px.size(); ++i) mask.data[i] = px[i] >= 128 ? 1 : 0;
  return mask;
}

}  // namespace fruitnerf
