#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace rlab {

using Symbol = std::uint32_t;

struct Histogram {
  std::map<Symbol, std::uint64_t> counts;
  std::uint64_t total = 0;

  std::size_t support_size() const noexcept { return counts.size(); }
};

// Exact counts; throws ValidationError on an empty sequence.
Histogram histogram(std::span<const Symbol> samples);
Histogram histogram_of_bytes(std::span<const std::uint8_t> bytes);

// Plug-in estimate −Σ (c/n)·log2(c/n), in bits.
double entropy_mle(const Histogram& hist);

enum class JvhwVariant {
  // Polynomial approximation below the count threshold, bias-corrected plug-in above.
  kPolynomial,
  // Miller–Madow: plug-in + (k−1)/(2n ln 2).
  kMillerMadow,
};

struct JvhwParams {
  JvhwVariant variant = JvhwVariant::kPolynomial;
  // Degree K = min(ceil(degree_scale·ln n), max_degree).
  double degree_scale = 1.6;
  std::size_t max_degree = 22;
  // Probability threshold Δ = threshold_scale·c1·ln n / n.
  double c1 = 1.0;
  double threshold_scale = 4.0;
};

std::string to_string(JvhwVariant v);

// Minimax-rate entropy estimate in bits; needs at least two samples.
double entropy_jvhw(const Histogram& hist, const JvhwParams& params = {});
double entropy_jvhw(std::span<const Symbol> samples, const JvhwParams& params = {});

// Coefficients g_0..g_K (monomial basis, ascending) of the best uniform
// approximation of −x·ln x on [0, 1], computed by the Remez exchange.
// Cached per degree.
const std::vector<long double>& entropy_poly_coefficients(std::size_t degree);

struct EntropyReport {
  double h_mle = 0.0;
  double h_jvhw = 0.0;
  std::uint64_t n_samples = 0;
  std::size_t support_size = 0;
};

EntropyReport entropy_report(const Histogram& hist, const JvhwParams& params = {});

enum class Estimator { kMle, kJvhw };

// Pixel values in [0,1] become 8-bit symbols round(v·255).
std::vector<Symbol> to_byte_symbols(std::span<const double> values);

// Entropy of one image's 256-bin pixel histogram.
double image_entropy(std::span<const double> image, Estimator estimator, const JvhwParams& params = {});

struct TextPair {
  std::string benign_word;
  std::string adversarial_word;
};

enum class TextSide { kBenign, kAdversarial };

struct TextMetrics {
  double mean_bits_per_char = 0.0;
  // mean_bits_per_char / 8.
  double h_byte_wise = 0.0;
  // Binary entropy of the pooled fraction of 1 bits over all words.
  double h_bit_wise = 0.0;
  // Mean DEFLATE size per word.
  double compressed_size = 0.0;
};

TextMetrics text_metrics(std::span<const TextPair> pairs, TextSide side);

// H2(p) in bits.
double binary_entropy(double p);

}  // namespace rlab
