#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace scpseg {

/// 8-bit RGB raster, row-major, pixel index i = y * width + x.
struct RasterImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;  // 3 * width * height

  RasterImage() = default;
  RasterImage(std::size_t w, std::size_t h) : width(w), height(h), rgb(3 * w * h, 0) {}

  std::size_t pixel_count() const noexcept { return width * height; }

  std::uint8_t* at(std::size_t x, std::size_t y) { return rgb.data() + 3 * (y * width + x); }
  const std::uint8_t* at(std::size_t x, std::size_t y) const {
    return rgb.data() + 3 * (y * width + x);
  }

  void set(std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = at(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
};

/// Reads a PNG (8-bit RGB/RGBA/gray, alpha dropped) or binary PPM (P6, maxval 255).
RasterImage load_image(const std::filesystem::path& path);

/// Same as load_image, from an in-memory file.
RasterImage decode_image(std::span<const std::uint8_t> bytes);

RasterImage decode_ppm(std::span<const std::uint8_t> bytes);
RasterImage decode_png(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const RasterImage& img);
void save_png(const RasterImage& img, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace scpseg
