#include "mf/io/pnm.hpp"

#include <cctype>

#include "mf/error.hpp"
#include "mf/io/csv.hpp"

namespace mf::io {

namespace {

class HeaderScanner {
 public:
  explicit HeaderScanner(const std::string& bytes) : b_(bytes) {}

  long long next_int() {
    skip_space_and_comments();
    long long v = 0;
    std::size_t digits = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + (b_[pos_++] - '0');
      if (++digits > 9) throw DataError("pnm: header value too large");
    }
    if (digits == 0) throw DataError("pnm: malformed header");
    return v;
  }

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  // Raster data starts after exactly one whitespace byte.
  std::size_t raster_start() {
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_]))) {
      throw DataError("pnm: missing separator before raster");
    }
    return pos_ + 1;
  }

 private:
  const std::string& b_;
  std::size_t pos_ = 2;
};

}  // namespace

Image8 parse_pnm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw DataError("pnm: bad magic");
  const char kind = bytes[1];
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
    throw DataError(std::string("pnm: unsupported format P") + kind);
  }
  HeaderScanner scan(bytes);
  Image8 img;
  img.width = scan.next_int();
  img.height = scan.next_int();
  const long long maxval = scan.next_int();
  if (img.width <= 0 || img.height <= 0) throw DataError("pnm: empty image");
  if (maxval <= 0 || maxval > 255) throw DataError("pnm: only 8-bit images are supported");
  img.channels = (kind == '3' || kind == '6') ? 3 : 1;
  const auto count = static_cast<std::size_t>(img.width * img.height * img.channels);
  img.pixels.resize(count);
  if (kind == '5' || kind == '6') {
    const std::size_t start = scan.raster_start();
    if (bytes.size() < start + count) throw DataError("pnm: truncated raster");
    for (std::size_t i = 0; i < count; ++i) img.pixels[i] = static_cast<std::uint8_t>(bytes[start + i]);
  } else {
    for (auto& p : img.pixels) {
      const long long v = scan.next_int();
      if (v > maxval) throw DataError("pnm: sample exceeds maxval");
      p = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

Image8 read_pnm(const std::string& path) {
  try {
    return parse_pnm(read_text(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string encode_pnm(const Image8& image) {
  if (image.channels != 1 && image.channels != 3) throw DataError("pnm: images must have 1 or 3 channels");
  if (static_cast<std::int64_t>(image.pixels.size()) != image.width * image.height * image.channels) {
    throw DataError("pnm: pixel buffer does not match image size");
  }
  std::string out = (image.channels == 1 ? "P5\n" : "P6\n") + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  return out;
}

void write_pnm(const std::string& path, const Image8& image) { write_text(path, encode_pnm(image)); }

}  // namespace mf::io
