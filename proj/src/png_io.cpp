#include "mspipe/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "mspipe/errors.hpp"

namespace mspipe {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Decodes any libpng-readable file into 8-bit with the requested channel
// count (1 = gray, 3 = rgb) using libpng's transform pipeline.
void read_png(const std::filesystem::path& path, int want_channels, int& width,
              int& height, std::vector<std::uint8_t>& pixels) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) fail("cannot open PNG: " + path.string());

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("failed to decode PNG: " + path.string());
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_packing(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE)
    png_set_palette_to_rgb(png);
  if (want_channels == 1)
    png_set_rgb_to_gray(png, PNG_ERROR_ACTION_NONE, -1.0, -1.0);
  else
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const int channels = static_cast<int>(png_get_channels(png, info));
  if (channels != want_channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("unexpected channel count in PNG: " + path.string());
  }

  pixels.assign(static_cast<std::size_t>(width) * height * want_channels, 0);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y)
    rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * want_channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
}

void write_png(const std::filesystem::path& path, int channels, int width,
               int height, const std::vector<std::uint8_t>& pixels) {
  if (width <= 0 || height <= 0 ||
      pixels.size() != static_cast<std::size_t>(width) * height * channels)
    fail("write_png: pixel buffer does not match dimensions");

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  FilePtr fp(std::fopen(tmp.string().c_str(), "wb"));
  if (!fp) fail("cannot open PNG for writing: " + tmp.string());

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("failed to encode PNG: " + tmp.string());
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(
        pixels.data() + static_cast<std::size_t>(y) * width * channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  fp.reset();
  std::filesystem::rename(tmp, path);
}

}  // namespace

Gray8 read_gray8_png(const std::filesystem::path& path) {
  Gray8 img;
  read_png(path, 1, img.width, img.height, img.pixels);
  return img;
}

void write_gray8_png(const Gray8& img, const std::filesystem::path& path) {
  write_png(path, 1, img.width, img.height, img.pixels);
}

Rgb8 read_rgb8_png(const std::filesystem::path& path) {
  Rgb8 img;
  read_png(path, 3, img.width, img.height, img.pixels);
  return img;
}

void write_rgb8_png(const Rgb8& img, const std::filesystem::path& path) {
  write_png(path, 3, img.width, img.height, img.pixels);
}

}  // namespace mspipe
