#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "rlab/nn.hpp"

namespace rlab {

// Channel-planar image layout of a flat input vector.
struct ImageShape {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const noexcept { return channels * height * width; }
};

// 784 → 1×28×28, 3072 → 3×32×32; anything else is a DimensionError.
ImageShape infer_shape(std::size_t dim);

using QuantTable = std::array<int, 64>;

// Base luminance table from the JPEG standard (Annex K), row-major.
const QuantTable& base_luminance_table();

struct QuantizationConfig {
  int quality = 50;  // 1..100
  QuantTable table = base_luminance_table();

  void validate() const;
};

// IJG scaling: s = q < 50 ? 5000/q : 200 − 2q, entry' = clamp((entry·s + 50)/100, 1, 255).
QuantTable scaled_table(const QuantizationConfig& config);

// Orthonormal 8×8 DCT-II and its inverse, row-major blocks.
std::array<double, 64> dct8x8(const std::array<double, 64>& block);
std::array<double, 64> idct8x8(const std::array<double, 64>& coeffs);

// JPEG-style lossy round trip per 8×8 block of each channel, on the 0..255
// scale with a −128 level shift. Edges are padded by replication; the
// coefficients are rounded half away from zero. Output is clamped to [0,1].
std::vector<double> quantize(std::span<const double> image, const ImageShape& shape,
                             const QuantizationConfig& config);

Dataset quantize_dataset(const Dataset& data, const ImageShape& shape, const QuantizationConfig& config);

// Raw DEFLATE (zlib level 9, 15-bit window, memLevel 8, default strategy),
// no container header.
std::size_t compressed_size(std::span<const std::uint8_t> payload);

// Upper bound compressed_size never exceeds for a payload of this length.
std::size_t compressed_size_bound(std::size_t length);

// round(v·255) per value.
std::vector<std::uint8_t> to_bytes(std::span<const double> values);

struct ComplexityReport {
  std::size_t original_size = 0;    // DEFLATE of the raw 8-bit pixels
  std::size_t compressed_size = 0;  // DEFLATE of the pixels after quantize()
  double ratio = 0.0;
};

inline constexpr int kComplexityQuality = 20;

ComplexityReport complexity_report(std::span<const double> image, const ImageShape& shape,
                                   int quality = kComplexityQuality);

struct QualityPoint {
  int quality = 0;
  double accuracy = 0.0;
};

std::vector<QualityPoint> quality_sweep(const MlpModel& model, const Dataset& data, std::span<const int> qualities,
                                        const ImageShape& shape);

}  // namespace rlab
