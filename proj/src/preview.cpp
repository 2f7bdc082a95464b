#include "cmrpipe/preview.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "cmrpipe/error.hpp"

namespace cmrpipe {

namespace fs = std::filesystem;

GrayImage montage(std::span<const std::vector<Slice2D>> rows, double lo, double hi) {
  if (rows.empty() || rows.front().empty()) throw UsageError("montage needs at least one slice");
  if (!(hi > lo)) hi = lo + 1.0;
  const auto dims = rows.front().front().dims();
  std::size_t cols = 0;
  for (const auto& r : rows) {
    cols = std::max(cols, r.size());
    for (const Slice2D& s : r)
      if (s.dims() != dims) throw GeometryError("montage slices differ in size");
  }
  GrayImage img;
  img.width = cols * dims[0];
  img.height = rows.size() * dims[1];
  img.pixels.assign(img.width * img.height, 0);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const Slice2D& s = rows[r][c];
      for (std::size_t y = 0; y < dims[1]; ++y) {
        const std::size_t row = r * dims[1] + (dims[1] - 1 - y);
        for (std::size_t x = 0; x < dims[0]; ++x) {
          const double t = std::clamp((s.at(x, y) - lo) / (hi - lo), 0.0, 1.0);
          img.pixels[row * img.width + c * dims[0] + x] =
              static_cast<std::uint8_t>(std::lround(t * 255.0));
        }
      }
    }
  return img;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

void write_png(const GrayImage& image, const fs::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height; ++y)
    png_write_row(png, image.pixels.data() + y * image.width);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

GrayImage read_png(const fs::path& path) {
  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.c_str()))
    throw IoError("cannot read " + path.string() + ": " + pi.message);
  pi.format = PNG_FORMAT_GRAY;
  GrayImage img;
  img.width = pi.width;
  img.height = pi.height;
  img.pixels.resize(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&pi);
    throw IoError("cannot decode " + path.string());
  }
  return img;
}

}  // namespace cmrpipe
