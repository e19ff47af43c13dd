#pragma once

#include <cctype>
#include <cmath>
#include <string>

#include "pmt/serialize.hpp"
#include "pmt/tensor.hpp"

namespace pmt {

struct PpmParseError : SerializeError {
  using SerializeError::SerializeError;
};

// Binary PPM (P6), maxval 255, header "P6\n<W> <H>\n255\n".
inline Bytes ppm_encode(const Tensor& image) {
  if (image.shape.size() != 3 || image.shape[0] != 3) {
    throw ShapeError("ppm_encode: expected [3,H,W], got " + shape_str(image.shape));
  }
  const std::size_t H = image.shape[1], W = image.shape[2];
  std::string header = "P6\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + 3 * H * W);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::round(image.at(c, y, x) * 255.0);
        out.push_back(static_cast<std::uint8_t>(v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v)));
      }
    }
  }
  return out;
}

namespace detail {

inline std::size_t ppm_token(const Bytes& b, std::size_t& pos, const char* what) {
  while (pos < b.size() && std::isspace(b[pos])) ++pos;
  if (pos >= b.size() || !std::isdigit(b[pos])) {
    throw PpmParseError(std::string("ppm: cannot parse ") + what);
  }
  std::size_t v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos++] - '0');
  }
  return v;
}

}  // namespace detail

inline Tensor ppm_decode(const Bytes& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw BadMagicError("ppm: bad magic (expected P6)");
  }
  std::size_t pos = 2;
  const std::size_t w = detail::ppm_token(bytes, pos, "width");
  const std::size_t h = detail::ppm_token(bytes, pos, "height");
  const std::size_t maxval = detail::ppm_token(bytes, pos, "maxval");
  if (maxval != 255) {
    throw PpmParseError("ppm: unsupported maxval " + std::to_string(maxval));
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw PpmParseError("ppm: missing whitespace after header");
  }
  ++pos;
  if (bytes.size() - pos < 3 * w * h) {
    throw TruncatedStreamError("ppm: truncated payload (need " +
                               std::to_string(3 * w * h) + " bytes, have " +
                               std::to_string(bytes.size() - pos) + ")");
  }
  Tensor img({3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(c, y, x) = static_cast<double>(bytes[pos++]) / 255.0;
      }
    }
  }
  return img;
}

inline void save_ppm(const std::string& path, const Tensor& image) {
  write_file(path, ppm_encode(image));
}

inline Tensor load_ppm(const std::string& path) {
  return ppm_decode(read_file(path));
}

}  // namespace pmt
