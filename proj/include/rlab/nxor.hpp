#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <utility>
#include <vector>

namespace rlab {

// Step unit: fires iff Σ wᵢ·xᵢ > threshold.
struct ThresholdUnit {
  std::vector<double> weights;
  double threshold = 0.0;

  bool fire(std::span<const int> inputs) const;
};

// Two hidden units over (x1, x2, r1..rn) and an output unit over (h1, h2).
// Inputs beyond the first two are redundant copies the task does not need.
class ThresholdNetwork {
 public:
  // Throws ValidationError unless, with every redundant weight zeroed, the
  // network computes x1 == x2 on all four pairs.
  ThresholdNetwork(std::array<ThresholdUnit, 2> hidden, ThresholdUnit output);

  const std::array<ThresholdUnit, 2>& hidden() const noexcept { return hidden_; }
  const ThresholdUnit& output() const noexcept { return output_; }
  std::size_t redundant_inputs() const noexcept { return hidden_[0].weights.size() - 2; }

  int evaluate(std::span<const int> inputs) const;

  // Copy with the given redundant weights: pairs (to h1, to h2), one per
  // redundant input. The number of redundant inputs becomes weights.size().
  ThresholdNetwork with_redundant(std::span<const std::pair<int, int>> weights) const;

 private:
  std::array<ThresholdUnit, 2> hidden_;
  ThresholdUnit output_;
};

// h1 = step(x1 + x2 + w1·x3 > 1.5), h2 = step(−x1 − x2 + w2·x3 > −0.5),
// y = step(h1 + h2 > 0.5), with w1 = w2 = 0.
ThresholdNetwork canonical_base();

struct SuppressionRow {
  int w1 = 0;
  int w2 = 0;
  std::size_t adv_count = 0;       // triples where y ≠ (x1 == x2)
  std::size_t allowing_edges = 0;  // non-zero weights from x3
  std::size_t potential = 0;       // |w1 + w2|
};

// The 9 rows for (w1, w2) ∈ {−1,0,1}², lexicographic.
std::vector<SuppressionRow> enumerate_suppression(const ThresholdNetwork& base);

struct GeneralizedRow {
  std::vector<std::pair<int, int>> weights;
  std::size_t adv_count = 0;
  std::size_t allowing_edges = 0;
  std::size_t potential = 0;  // Σ |w_h1 + w_h2| over redundant inputs
};

struct GeneralizedSummary {
  std::size_t redundant_bits = 0;
  std::size_t input_space = 0;  // 2^(2 + n)
  std::vector<GeneralizedRow> rows;
  // (potential, adv_count) → number of weight configurations.
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> distribution;
};

inline constexpr std::size_t kMaxRedundantBits = 16;
inline constexpr std::size_t kDefaultConfigurationCap = 59049;  // 3^10

// All w ∈ {−1,0,1}^(2n) in lexicographic order. Throws ValidationError when
// n exceeds kMaxRedundantBits or 3^(2n) exceeds `cap`.
GeneralizedSummary generalized_enumerate(std::size_t redundant_bits, const ThresholdNetwork& base,
                                         std::size_t cap = kDefaultConfigurationCap);

}  // namespace rlab
