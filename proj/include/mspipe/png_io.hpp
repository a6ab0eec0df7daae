#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mspipe {

struct Gray8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

struct Rgb8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, interleaved RGB
};

Gray8 read_gray8_png(const std::filesystem::path& path);
void write_gray8_png(const Gray8& img, const std::filesystem::path& path);

Rgb8 read_rgb8_png(const std::filesystem::path& path);
void write_rgb8_png(const Rgb8& img, const std::filesystem::path& path);

}  // namespace mspipe
