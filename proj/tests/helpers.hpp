#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "rlab/nn.hpp"
#include "rlab/rng.hpp"

namespace testutil {

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  rlab::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

// 784 -> 64 -> 10 trained on synthetic digits; cached per process.
const rlab::MlpModel& digit_model();

}  // namespace testutil
