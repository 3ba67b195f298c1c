#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rlab/entropy.hpp"
#include "rlab/nn.hpp"

namespace rlab {

// IDX header: two zero bytes, a type code, the rank, then big-endian u32 dims.
struct IdxHeader {
  std::uint8_t type_code = 0;
  std::vector<std::uint32_t> dims;
};

inline constexpr std::uint8_t kIdxUnsignedByte = 0x08;
inline constexpr std::uint8_t kIdxDouble = 0x0E;

IdxHeader parse_idx_header(std::span<const std::uint8_t> bytes);

// Images: type 0x08 with rank 3 (n, rows, cols) scaled by 1/255, or type
// 0x0E (big-endian f64) with rank 2 (n, dim) as written by save_dataset.
// Labels: type 0x08, rank 1.
Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  std::optional<std::size_t> limit = {}, std::size_t num_classes = 10);
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::optional<std::size_t> limit = {}, std::size_t num_classes = 10);

inline constexpr std::size_t kCifarRecordBytes = 3073;

struct Cifar10Record {
  std::uint8_t label = 0;
  std::span<const std::uint8_t> pixels;  // 3×32×32, channel-planar
};

Dataset parse_cifar10(std::span<const std::uint8_t> bytes, std::optional<std::size_t> limit = {});
Dataset load_cifar10(const std::filesystem::path& path, std::optional<std::size_t> limit = {});

std::vector<TextPair> parse_text_pairs(std::string_view text);
std::vector<TextPair> load_text_pairs(const std::filesystem::path& path);

// Writes inputs as IDX f64 (n, dim) and labels as IDX u8.
void save_dataset(const Dataset& data, const std::filesystem::path& images,
                  const std::filesystem::path& labels);
std::vector<std::uint8_t> serialize_idx_images(const Dataset& data);
std::vector<std::uint8_t> serialize_idx_labels(const Dataset& data);

// Procedurally rendered 28×28 handwritten-style digits, labels cycling 0..9,
// pixel values on the 8-bit grid. Deterministic in (n, seed).
Dataset synth_digits(std::size_t n, std::uint64_t seed);

inline constexpr std::size_t kMiniDigitsCount = 64;
inline constexpr std::uint64_t kMiniDigitsSeed = 20190101;

// The 64-image fixture used when `--dataset mini` is given.
Dataset mini_digits();

// Two Gaussian blobs in [0,1]^2, linearly separable by construction.
Dataset synth_blobs(std::size_t n, std::uint64_t seed);

// Reports ---------------------------------------------------------------

using Cell = std::variant<std::int64_t, double, std::string>;

struct Report {
  std::string experiment;
  std::vector<std::string> notes;  // emitted as "# ..." header lines
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);
};

enum class ReportFormat { kCsv, kJson };

std::string format_real(double v);  // 9 significant digits
std::string render_report(const Report& report, ReportFormat format);
void write_report(const Report& report, ReportFormat format, const std::filesystem::path& path);

// Inverse of the CSV rendering. Cells parse as integer, then real, then string.
Report parse_csv_report(std::string_view text);

}  // namespace rlab
