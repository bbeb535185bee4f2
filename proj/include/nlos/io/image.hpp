#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nlos/tensor/tensor.hpp"

namespace nlos::io {

/// 8-bit binary graymap (P5) of an [H x W] image after min-max
/// normalisation: round(255 * (v - min) / (max - min)). A constant image
/// becomes all 128.
std::vector<std::uint8_t> encode_pgm(const Tensor& image);
void write_pgm(const std::filesystem::path& path, const Tensor& image);

struct GrayImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};
/// Reads back what encode_pgm writes (maxval 255 only).
GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes);

}  // namespace nlos::io
