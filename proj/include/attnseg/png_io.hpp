#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace attnseg::png_io {

struct GrayImage {
  int width = 0, height = 0;
  int bit_depth = 8;  // 8 or 16
  std::vector<uint16_t> pixels;  // row-major, one sample per pixel
};

void write_gray(const std::string& path, const GrayImage& img);
GrayImage read_gray(const std::string& path);

}  // namespace attnseg::png_io
