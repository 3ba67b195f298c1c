#include "rlab/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <zlib.h>

#include "rlab/error.hpp"

namespace rlab {

namespace {

// basis[u][x] = c(u)·cos((2x+1)uπ/16)
const std::array<std::array<double, 8>, 8>& dct_basis() {
  static const auto table = [] {
    std::array<std::array<double, 8>, 8> b{};
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) b[u][x] = cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    }
    return b;
  }();
  return table;
}

void begin_deflate(z_stream& zs) {
  zs = {};
  if (deflateInit2(&zs, 9, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error("zlib deflateInit2 failed");
  }
}

}  // namespace

ImageShape infer_shape(std::size_t dim) {
  if (dim == 784) return {1, 28, 28};
  if (dim == 3072) return {3, 32, 32};
  throw DimensionError("cannot infer image shape for input dimension " + std::to_string(dim));
}

const QuantTable& base_luminance_table() {
  static const QuantTable table = {
      16, 11, 10, 16, 24,  40,  51,  61,   //
      12, 12, 14, 19, 26,  58,  60,  55,   //
      14, 13, 16, 24, 40,  57,  69,  56,   //
      14, 17, 22, 29, 51,  87,  80,  62,   //
      18, 22, 37, 56, 68,  109, 103, 77,   //
      24, 35, 55, 64, 81,  104, 113, 92,   //
      49, 64, 78, 87, 103, 121, 120, 101,  //
      72, 92, 95, 98, 112, 100, 103, 99,
  };
  return table;
}

void QuantizationConfig::validate() const {
  if (quality < 1 || quality > 100) throw ValidationError("quality must be in [1, 100]");
  for (int q : table) {
    if (q < 1 || q > 255) throw ValidationError("quantization table entries must be in [1, 255]");
  }
}

QuantTable scaled_table(const QuantizationConfig& config) {
  config.validate();
  const int q = config.quality;
  const int scale = q < 50 ? 5000 / q : 200 - 2 * q;
  QuantTable out{};
  for (std::size_t i = 0; i < 64; ++i) out[i] = std::clamp((config.table[i] * scale + 50) / 100, 1, 255);
  return out;
}

std::array<double, 64> dct8x8(const std::array<double, 64>& block) {
  const auto& b = dct_basis();
  std::array<double, 64> tmp{}, out{};
  // rows, then columns
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x) s += b[u][x] * block[y * 8 + x];
      tmp[y * 8 + u] = s;
    }
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y) s += b[v][y] * tmp[y * 8 + u];
      out[v * 8 + u] = s;
    }
  return out;
}

std::array<double, 64> idct8x8(const std::array<double, 64>& coeffs) {
  const auto& b = dct_basis();
  std::array<double, 64> tmp{}, out{};
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int v = 0; v < 8; ++v) s += b[v][y] * coeffs[v * 8 + u];
      tmp[y * 8 + u] = s;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int u = 0; u < 8; ++u) s += b[u][x] * tmp[y * 8 + u];
      out[y * 8 + x] = s;
    }
  return out;
}

std::vector<double> quantize(std::span<const double> image, const ImageShape& shape,
                             const QuantizationConfig& config) {
  if (image.size() != shape.size() || shape.size() == 0) {
    throw DimensionError("image has " + std::to_string(image.size()) + " values, shape needs " +
                         std::to_string(shape.size()));
  }
  const QuantTable table = scaled_table(config);
  const std::size_t h = shape.height, w = shape.width;
  std::vector<double> out(image.size());
  std::array<double, 64> block{};
  for (std::size_t c = 0; c < shape.channels; ++c) {
    const double* plane = image.data() + c * h * w;
    double* dst = out.data() + c * h * w;
    for (std::size_t by = 0; by < h; by += 8)
      for (std::size_t bx = 0; bx < w; bx += 8) {
        for (std::size_t y = 0; y < 8; ++y)
          for (std::size_t x = 0; x < 8; ++x) {
            const std::size_t sy = std::min(by + y, h - 1), sx = std::min(bx + x, w - 1);
            block[y * 8 + x] = plane[sy * w + sx] * 255.0 - 128.0;
          }
        std::array<double, 64> coeffs = dct8x8(block);
        for (std::size_t i = 0; i < 64; ++i) coeffs[i] = std::round(coeffs[i] / table[i]) * table[i];
        const std::array<double, 64> back = idct8x8(coeffs);
        for (std::size_t y = 0; y < 8 && by + y < h; ++y)
          for (std::size_t x = 0; x < 8 && bx + x < w; ++x) {
            dst[(by + y) * w + bx + x] = std::clamp((back[y * 8 + x] + 128.0) / 255.0, 0.0, 1.0);
          }
      }
  }
  return out;
}

Dataset quantize_dataset(const Dataset& data, const ImageShape& shape, const QuantizationConfig& config) {
  Dataset out;
  out.num_classes = data.num_classes;
  out.examples.reserve(data.size());
  for (const Example& ex : data.examples) out.examples.push_back({quantize(ex.input, shape, config), ex.label});
  return out;
}

std::size_t compressed_size(std::span<const std::uint8_t> payload) {
  z_stream zs;
  begin_deflate(zs);
  std::vector<unsigned char> buf(deflateBound(&zs, payload.size()) + 16);
  zs.next_in = const_cast<Bytef*>(payload.data());
  zs.avail_in = static_cast<uInt>(payload.size());
  zs.next_out = buf.data();
  zs.avail_out = static_cast<uInt>(buf.size());
  const int rc = deflate(&zs, Z_FINISH);
  const std::size_t written = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error("zlib deflate did not finish");
  return written;
}

std::size_t compressed_size_bound(std::size_t length) {
  z_stream zs;
  begin_deflate(zs);
  const std::size_t bound = deflateBound(&zs, length);
  deflateEnd(&zs);
  return bound;
}

std::vector<std::uint8_t> to_bytes(std::span<const double> values) {
  std::vector<std::uint8_t> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

ComplexityReport complexity_report(std::span<const double> image, const ImageShape& shape, int quality) {
  QuantizationConfig config;
  config.quality = quality;
  ComplexityReport r;
  r.original_size = compressed_size(to_bytes(image));
  r.compressed_size = compressed_size(to_bytes(quantize(image, shape, config)));
  r.ratio = r.original_size == 0 ? 0.0
                                 : static_cast<double>(r.compressed_size) / static_cast<double>(r.original_size);
  return r;
}

std::vector<QualityPoint> quality_sweep(const MlpModel& model, const Dataset& data, std::span<const int> qualities,
                                        const ImageShape& shape) {
  std::vector<QualityPoint> out;
  for (int q : qualities) {
    QuantizationConfig config;
    config.quality = q;
    out.push_back({q, accuracy(model, quantize_dataset(data, shape, config))});
  }
  return out;
}

}  // namespace rlab
