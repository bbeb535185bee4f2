#include "nlos/io/image.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

#include "nlos/common/error.hpp"
#include "nlos/io/container.hpp"

namespace nlos::io {

std::vector<std::uint8_t> encode_pgm(const Tensor& image) {
  if (image.rank() != 2) throw DimensionError("encode_pgm: expected [H x W], got " +
                                              shape_string(image.shape()));
  if (!image.all_finite()) throw NumericError("encode_pgm: image has non-finite values");
  const std::size_t h = image.dim(0), w = image.dim(1);
  const std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const double lo = image.min(), hi = image.max();
  for (double v : image.data()) {
    if (hi == lo) {
      out.push_back(128);
    } else {
      out.push_back(static_cast<std::uint8_t>(std::lround(255.0 * (v - lo) / (hi - lo))));
    }
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  write_bytes(path, encode_pgm(image));
}

GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P5") throw FormatError("not a P5 graymap");
  GrayImage img;
  try {
    img.width = std::stoul(token());
    img.height = std::stoul(token());
    if (std::stoul(token()) != 255) throw FormatError("only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw FormatError("bad graymap header");
  }
  ++pos;  // single whitespace after maxval
  if (bytes.size() < pos || bytes.size() - pos != img.width * img.height) {
    throw FormatError("graymap payload size mismatch");
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

}  // namespace nlos::io
