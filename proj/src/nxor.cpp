#include "rlab/nxor.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "rlab/error.hpp"

namespace rlab {

bool ThresholdUnit::fire(std::span<const int> inputs) const {
  if (inputs.size() != weights.size()) throw DimensionError("threshold unit input size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) s += weights[i] * inputs[i];
  return s > threshold;
}

ThresholdNetwork::ThresholdNetwork(std::array<ThresholdUnit, 2> hidden, ThresholdUnit output)
    : hidden_(std::move(hidden)), output_(std::move(output)) {
  const std::size_t n = hidden_[0].weights.size();
  if (n < 2 || hidden_[1].weights.size() != n) {
    throw DimensionError("hidden units need matching weight vectors over at least (x1, x2)");
  }
  if (output_.weights.size() != 2) throw DimensionError("output unit takes exactly (h1, h2)");
  std::array<ThresholdUnit, 2> plain = hidden_;
  for (auto& u : plain) std::fill(u.weights.begin() + 2, u.weights.end(), 0.0);
  std::vector<int> in(n, 1);  // redundant inputs set, their weights zeroed
  for (int a = 0; a <= 1; ++a) {
    for (int b = 0; b <= 1; ++b) {
      in[0] = a;
      in[1] = b;
      const int h[2] = {plain[0].fire(in) ? 1 : 0, plain[1].fire(in) ? 1 : 0};
      if (output_.fire(h) != (a == b)) throw ValidationError("base network does not compute x1 == x2");
    }
  }
}

int ThresholdNetwork::evaluate(std::span<const int> inputs) const {
  const int h[2] = {hidden_[0].fire(inputs) ? 1 : 0, hidden_[1].fire(inputs) ? 1 : 0};
  return output_.fire(h) ? 1 : 0;
}

ThresholdNetwork ThresholdNetwork::with_redundant(std::span<const std::pair<int, int>> weights) const {
  std::array<ThresholdUnit, 2> hidden = hidden_;
  for (auto& u : hidden) u.weights.resize(2);
  for (const auto& [to_h1, to_h2] : weights) {
    hidden[0].weights.push_back(to_h1);
    hidden[1].weights.push_back(to_h2);
  }
  return ThresholdNetwork(std::move(hidden), output_);
}

ThresholdNetwork canonical_base() {
  return ThresholdNetwork({ThresholdUnit{{1, 1, 0}, 1.5}, ThresholdUnit{{-1, -1, 0}, -0.5}},
                          ThresholdUnit{{1, 1}, 0.5});
}

namespace {

std::size_t count_mismatches(const ThresholdNetwork& net) {
  const std::size_t n = net.redundant_inputs() + 2;
  std::vector<int> in(n);
  std::size_t bad = 0;
  for (std::size_t code = 0; code < (std::size_t{1} << n); ++code) {
    for (std::size_t i = 0; i < n; ++i) in[i] = static_cast<int>((code >> (n - 1 - i)) & 1);
    if (net.evaluate(in) != (in[0] == in[1] ? 1 : 0)) ++bad;
  }
  return bad;
}

}  // namespace

std::vector<SuppressionRow> enumerate_suppression(const ThresholdNetwork& base) {
  const GeneralizedSummary s = generalized_enumerate(1, base);
  std::vector<SuppressionRow> rows;
  for (const GeneralizedRow& r : s.rows) {
    rows.push_back({r.weights[0].first, r.weights[0].second, r.adv_count, r.allowing_edges, r.potential});
  }
  return rows;
}

GeneralizedSummary generalized_enumerate(std::size_t redundant_bits, const ThresholdNetwork& base, std::size_t cap) {
  if (redundant_bits > kMaxRedundantBits) {
    throw ValidationError("at most " + std::to_string(kMaxRedundantBits) + " redundant bits are supported");
  }
  std::size_t configs = 1;
  for (std::size_t i = 0; i < 2 * redundant_bits; ++i) {
    configs *= 3;
    if (configs > cap) {
      throw ValidationError("3^" + std::to_string(2 * redundant_bits) + " weight configurations exceed the cap of " +
                            std::to_string(cap));
    }
  }
  GeneralizedSummary out;
  out.redundant_bits = redundant_bits;
  out.input_space = std::size_t{1} << (2 + redundant_bits);
  std::vector<int> digits(2 * redundant_bits, 0);  // base-3 odometer, 0 ↦ −1
  for (std::size_t c = 0; c < configs; ++c) {
    GeneralizedRow row;
    for (std::size_t i = 0; i < redundant_bits; ++i) {
      const int a = digits[2 * i] - 1, b = digits[2 * i + 1] - 1;
      row.weights.emplace_back(a, b);
      row.allowing_edges += (a != 0) + (b != 0);
      row.potential += static_cast<std::size_t>(std::abs(a + b));
    }
    row.adv_count = count_mismatches(base.with_redundant(row.weights));
    ++out.distribution[{row.potential, row.adv_count}];
    out.rows.push_back(std::move(row));
    for (std::size_t k = digits.size(); k-- > 0;) {
      if (++digits[k] < 3) break;
      digits[k] = 0;
    }
  }
  return out;
}

}  // namespace rlab
