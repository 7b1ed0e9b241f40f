#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mf::io {

/// 8-bit image, interleaved channels, row-major.
struct Image8 {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::int64_t channels = 1;  // 1 (PGM) or 3 (PPM)
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::int64_t y, std::int64_t x, std::int64_t c = 0) const {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
};

/// Reads binary P5/P6 and ASCII P2/P3 files with maxval <= 255.
Image8 read_pnm(const std::string& path);
Image8 parse_pnm(const std::string& bytes);
/// Writes P5 for one channel, P6 for three.
void write_pnm(const std::string& path, const Image8& image);
std::string encode_pnm(const Image8& image);

}  // namespace mf::io
