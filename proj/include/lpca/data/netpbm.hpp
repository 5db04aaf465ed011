#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "lpca/core/error.hpp"

namespace lpca {

/// 8-bit interleaved raster: 1 channel (P5) or 3 channels (P6).
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> bytes;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), bytes(w * h * c, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c = 0) { return bytes[(y * width + x) * channels + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return bytes[(y * width + x) * channels + c];
  }
  bool operator==(const Image&) const = default;
};

namespace detail {

class PnmHeaderReader {
 public:
  PnmHeaderReader(const std::vector<std::uint8_t>& data, const std::string& source) : d_(data), source_(source) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(source_ + ": " + what + " at byte " + std::to_string(pos_));
  }

  std::string magic() {
    if (d_.size() < 2) fail("truncated header");
    std::string m{static_cast<char>(d_[0]), static_cast<char>(d_[1])};
    pos_ = 2;
    return m;
  }

  // Skips whitespace and '#' comments, then reads an ASCII decimal.
  std::size_t number() {
    for (;;) {
      if (pos_ >= d_.size()) fail("truncated header");
      if (d_[pos_] == '#') {
        while (pos_ < d_.size() && d_[pos_] != '\n') ++pos_;
      } else if (std::isspace(d_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
    if (!std::isdigit(d_[pos_])) fail("expected a decimal number");
    std::size_t v = 0;
    while (pos_ < d_.size() && std::isdigit(d_[pos_])) {
      v = v * 10 + static_cast<std::size_t>(d_[pos_] - '0');
      if (v > (1u << 24)) fail("header value too large");
      ++pos_;
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void single_whitespace() {
    if (pos_ >= d_.size() || !std::isspace(d_[pos_])) fail("expected whitespace after maxval");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& d_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(tmp.string() + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

/// Parses binary P5/P6 with maxval 255.
inline Image decode_pnm(const std::vector<std::uint8_t>& data, const std::string& source = "<memory>") {
  detail::PnmHeaderReader r(data, source);
  const std::string magic = r.magic();
  std::size_t channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw DataError(source + ": bad magic '" + magic + "' (expected P5 or P6) at byte 0");
  }
  const std::size_t w = r.number();
  const std::size_t h = r.number();
  const std::size_t maxval = r.number();
  if (w == 0 || h == 0) r.fail("zero image dimension");
  if (maxval != 255) r.fail("maxval " + std::to_string(maxval) + " unsupported (only 255)");
  r.single_whitespace();
  const std::size_t need = w * h * channels;
  if (data.size() - r.pos() < need) {
    throw DataError(source + ": truncated payload, expected " + std::to_string(need) + " bytes from byte " +
                    std::to_string(r.pos()) + ", file ends at byte " + std::to_string(data.size()));
  }
  Image img(w, h, channels);
  std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(r.pos()), need, img.bytes.begin());
  return img;
}

inline std::vector<std::uint8_t> encode_pnm(const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw DataError("encode_pnm: channels must be 1 or 3");
  const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width) +
                             " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.bytes.begin(), img.bytes.end());
  return out;
}

inline Image read_pnm(const std::filesystem::path& path) { return decode_pnm(detail::read_file(path), path.string()); }

inline Image read_ppm(const std::filesystem::path& path) {
  Image img = read_pnm(path);
  if (img.channels != 3) throw DataError(path.string() + ": expected P6 color image at byte 0");
  return img;
}

inline Image read_pgm(const std::filesystem::path& path) {
  Image img = read_pnm(path);
  if (img.channels != 1) throw DataError(path.string() + ": expected P5 gray image at byte 0");
  return img;
}

inline void write_pnm(const Image& img, const std::filesystem::path& path) {
  detail::write_file_atomic(path, encode_pnm(img));
}

inline void write_ppm(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 3) throw DataError("write_ppm: image has " + std::to_string(img.channels) + " channels");
  write_pnm(img, path);
}

inline void write_pgm(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 1) throw DataError("write_pgm: image has " + std::to_string(img.channels) + " channels");
  write_pnm(img, path);
}

}  // namespace lpca
