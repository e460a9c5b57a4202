#pragma once

#include <filesystem>
#include <string>

#include "steer/ad/tensor.hpp"

namespace steer::imaging {

/// Flat-binary tensor file:
///   bytes 0..7   magic "STEERTNS"
///   uint64 LE    rank (1..8)
///   uint64 LE    extent, repeated rank times
///   float64 LE   payload in row-major order
/// Round trips are bitwise exact.
inline constexpr char kFlatMagic[8] = {'S', 'T', 'E', 'E', 'R', 'T', 'N', 'S'};
inline constexpr std::size_t kMaxFlatRank = 8;
inline constexpr std::size_t kMaxFlatElements = std::size_t{1} << 32;

void write_flat(const std::filesystem::path& path, const ad::Tensor& tensor);
ad::Tensor read_flat(const std::filesystem::path& path);

/// Binary 16-bit PGM of the last two axes, min-max scaled to 0..65535.
/// Viewing only: the scaling is lossy. A constant image writes all zeros.
void write_pgm16(const std::filesystem::path& path, const ad::Tensor& image);
/// Reads a P5 PGM (8- or 16-bit) into [H, W] values in [0, 1].
ad::Tensor read_pgm16(const std::filesystem::path& path);

/// One line per row, values comma separated in shortest round-trip form.
std::string format_csv(const ad::Tensor& image);
void write_csv(const std::filesystem::path& path, const ad::Tensor& image);
ad::Tensor read_csv(const std::filesystem::path& path);

}  // namespace steer::imaging
