#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cmrpipe/volume.hpp"

namespace cmrpipe {

/// 8-bit grayscale raster, row-major, row 0 at the top.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Slices laid out side by side, one row per span. Intensities are mapped
/// linearly from [lo, hi] to [0, 255] and clipped. Axis 0 runs left to
/// right and axis 1 bottom to top, so anterior is up for RAS+ data.
GrayImage montage(std::span<const std::vector<Slice2D>> rows, double lo, double hi);

void write_png(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_png(const std::filesystem::path& path);

}  // namespace cmrpipe
