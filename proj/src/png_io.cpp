#include "attnseg/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "attnseg/tensor.hpp"

namespace attnseg::png_io {

namespace {
struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;
}  // namespace

void write_gray(const std::string& path, const GrayImage& img) {
  if (img.bit_depth != 8 && img.bit_depth != 16)
    throw IoError("png: bit depth must be 8 or 16");
  if ((long long)img.pixels.size() != (long long)img.width * img.height)
    throw IoError("png: pixel count mismatch");
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("png: cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                            nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: allocation failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: write error for " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, (png_uint_32)img.width, (png_uint_32)img.height,
               img.bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<uint8_t> row((size_t)img.width * (img.bit_depth / 8));
  for (int y = 0; y < img.height; ++y) {
    if (img.bit_depth == 8) {
      for (int x = 0; x < img.width; ++x)
        row[(size_t)x] = (uint8_t)img.pixels[(size_t)y * img.width + x];
    } else {
      for (int x = 0; x < img.width; ++x) {
        const uint16_t v = img.pixels[(size_t)y * img.width + x];
        row[(size_t)2 * x] = (uint8_t)(v >> 8);  // PNG is big-endian
        row[(size_t)2 * x + 1] = (uint8_t)(v & 0xff);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

GrayImage read_gray(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("png: cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                           nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: allocation failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png: read error for " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  int depth = png_get_bit_depth(png, info);
  int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  depth = png_get_bit_depth(png, info);

  GrayImage img;
  img.width = (int)w;
  img.height = (int)h;
  img.bit_depth = depth;
  img.pixels.resize((size_t)w * h);
  std::vector<uint8_t> row(png_get_rowbytes(png, info));
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    if (depth == 8) {
      for (png_uint_32 x = 0; x < w; ++x) img.pixels[(size_t)y * w + x] = row[x];
    } else {
      for (png_uint_32 x = 0; x < w; ++x)
        img.pixels[(size_t)y * w + x] =
            (uint16_t)((row[(size_t)2 * x] << 8) | row[(size_t)2 * x + 1]);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace attnseg::png_io
