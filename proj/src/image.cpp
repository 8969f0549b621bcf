#include "scpseg/image.hpp"

#include <png.h>

#include <array>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "scpseg/error.hpp"

namespace scpseg {

namespace {

constexpr std::array<std::uint8_t, 8> kPngSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= kPngSignature.size() &&
         std::memcmp(bytes.data(), kPngSignature.data(), kPngSignature.size()) == 0;
}

bool is_pnm(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] >= '1' && bytes[1] <= '7';
}

class PnmHeaderReader {
 public:
  explicit PnmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t read_uint() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw Error(Errc::corrupt_image, "PPM header: expected a number");
    }
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > (1u << 30)) throw Error(Errc::corrupt_image, "PPM header: value too large");
    }
    return value;
  }

  /// Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw Error(Errc::corrupt_image, "PPM header: missing separator before raster");
    }
    return pos_ + 1;
  }

  void skip(std::size_t n) { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::io_error, "read failed: " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

RasterImage decode_ppm(std::span<const std::uint8_t> bytes) {
  if (!is_pnm(bytes)) throw Error(Errc::unsupported_format, "not a PNM file");
  if (bytes[1] != '6') {
    throw Error(Errc::unsupported_format,
                std::string("PNM variant P") + static_cast<char>(bytes[1]) +
                    " not supported, only binary P6");
  }
  PnmHeaderReader reader(bytes);
  reader.skip(2);
  const std::size_t width = reader.read_uint();
  const std::size_t height = reader.read_uint();
  const std::size_t maxval = reader.read_uint();
  const std::size_t offset = reader.raster_offset();
  if (width == 0 || height == 0) throw Error(Errc::corrupt_image, "PPM with empty raster");
  if (maxval != 255) {
    throw Error(Errc::unsupported_format, "PPM maxval " + std::to_string(maxval) + " not supported");
  }
  RasterImage img(width, height);
  if (bytes.size() - offset < img.rgb.size()) {
    throw Error(Errc::corrupt_image, "PPM raster truncated");
  }
  std::memcpy(img.rgb.data(), bytes.data() + offset, img.rgb.size());
  return img;
}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::corrupt_image, "PNG decode: " + msg);
  }
  image.format = PNG_FORMAT_RGBA;
  const std::size_t width = image.width;
  const std::size_t height = image.height;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::corrupt_image, "PNG decode: " + msg);
  }
  RasterImage img(width, height);
  for (std::size_t i = 0; i < width * height; ++i) {
    std::memcpy(&img.rgb[3 * i], &rgba[4 * i], 3);
  }
  return img;
}

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_pnm(bytes)) return decode_ppm(bytes);
  throw Error(Errc::unsupported_format, "unrecognized image format (PNG or P6 PPM expected)");
}

RasterImage load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(Errc::io_error, "no such file: " + path.string());
  return decode_image(read_file_bytes(path));
}

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  if (img.width == 0 || img.height == 0 || img.rgb.size() != 3 * img.pixel_count()) {
    throw Error(Errc::invalid_argument, "encode_png: malformed image");
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.rgb.data(), 0, nullptr)) {
    throw Error(Errc::io_error, std::string("PNG encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.rgb.data(), 0, nullptr)) {
    throw Error(Errc::io_error, std::string("PNG encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

void save_png(const RasterImage& img, const std::filesystem::path& path) {
  write_file_bytes(path, encode_png(img));
}

}  // namespace scpseg
