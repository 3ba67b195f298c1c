#include "rlab/entropy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "rlab/complexity.hpp"
#include "rlab/error.hpp"

namespace rlab {

Histogram histogram(std::span<const Symbol> samples) {
  if (samples.empty()) throw ValidationError("histogram of an empty sequence");
  Histogram h;
  for (Symbol s : samples) ++h.counts[s];
  h.total = samples.size();
  return h;
}

Histogram histogram_of_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw ValidationError("histogram of an empty sequence");
  Histogram h;
  for (std::uint8_t b : bytes) ++h.counts[b];
  h.total = bytes.size();
  return h;
}

double entropy_mle(const Histogram& hist) {
  if (hist.total == 0) return 0.0;
  const double n = static_cast<double>(hist.total);
  double h = 0.0;
  for (const auto& [sym, c] : hist.counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

std::string to_string(JvhwVariant v) {
  return v == JvhwVariant::kPolynomial ? "jvhw-polynomial" : "miller-madow";
}

// Remez exchange ---------------------------------------------------------

namespace {

using Real = long double;

Real neg_xlogx(Real x) { return x <= 0 ? 0 : -x * std::log(x); }

// Chebyshev series on t ∈ [-1, 1], x = (t + 1)/2.
Real cheb_eval(const std::vector<Real>& a, Real t) {
  Real b1 = 0, b2 = 0;
  for (std::size_t j = a.size(); j-- > 1;) {
    const Real b0 = 2 * t * b1 - b2 + a[j];
    b2 = b1;
    b1 = b0;
  }
  return t * b1 - b2 + a[0];
}

std::vector<Real> solve_dense(std::vector<std::vector<Real>> m, std::vector<Real> rhs) {
  const std::size_t n = rhs.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    std::swap(m[col], m[piv]);
    std::swap(rhs[col], rhs[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const Real f = m[r][col] / m[col][col];
      for (std::size_t c = col; c < n; ++c) m[r][c] -= f * m[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<Real> x(n);
  for (std::size_t r = n; r-- > 0;) {
    Real s = rhs[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= m[r][c] * x[c];
    x[r] = s / m[r][r];
  }
  return x;
}

Real error_at(const std::vector<Real>& a, Real t) { return neg_xlogx((t + 1) / 2) - cheb_eval(a, t); }

// Golden-section refinement of |error| on [lo, hi].
Real refine_extremum(const std::vector<Real>& a, Real lo, Real hi) {
  const Real g = (std::sqrt(Real(5)) - 1) / 2;
  Real x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  Real f1 = std::abs(error_at(a, x1)), f2 = std::abs(error_at(a, x2));
  for (int it = 0; it < 80 && hi - lo > 1e-18L; ++it) {
    if (f1 > f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = std::abs(error_at(a, x1));
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = std::abs(error_at(a, x2));
    }
  }
  return (lo + hi) / 2;
}

std::vector<Real> remez_chebyshev(std::size_t degree) {
  const std::size_t m = degree + 2;
  std::vector<Real> ref(m);
  for (std::size_t i = 0; i < m; ++i) {
    ref[i] = -std::cos(std::numbers::pi_v<Real> * static_cast<Real>(i) / static_cast<Real>(m - 1));
  }
  // Dense grid clustered at both ends (the singular derivative at x = 0
  // pushes extrema towards t = -1).
  const std::size_t grid_n = 4000 * m;
  std::vector<Real> grid(grid_n + 1);
  for (std::size_t i = 0; i <= grid_n; ++i) {
    const Real s = static_cast<Real>(i) / static_cast<Real>(grid_n);
    const Real u = (1 - std::cos(std::numbers::pi_v<Real> * s)) / 2;  // [0, 1]
    grid[i] = 2 * u * u - 1;
  }

  std::vector<Real> a;
  for (int iter = 0; iter < 60; ++iter) {
    std::vector<std::vector<Real>> mat(m, std::vector<Real>(m));
    std::vector<Real> rhs(m);
    for (std::size_t i = 0; i < m; ++i) {
      Real t0 = 1, t1 = ref[i];
      for (std::size_t j = 0; j <= degree; ++j) {
        if (j == 0) {
          mat[i][j] = 1;
        } else if (j == 1) {
          mat[i][j] = ref[i];
        } else {
          const Real t2 = 2 * ref[i] * t1 - t0;
          t0 = t1;
          t1 = t2;
          mat[i][j] = t2;
        }
      }
      mat[i][degree + 1] = (i % 2 == 0) ? 1 : -1;
      rhs[i] = neg_xlogx((ref[i] + 1) / 2);
    }
    std::vector<Real> sol = solve_dense(std::move(mat), std::move(rhs));
    a.assign(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(degree + 1));
    const Real level = std::abs(sol[degree + 1]);

    // Extremum of each sign run on the grid, refined locally.
    std::vector<Real> ext;
    std::vector<Real> ext_err;
    std::vector<Real> err(grid_n + 1);
    for (std::size_t k = 0; k <= grid_n; ++k) err[k] = error_at(a, grid[k]);
    std::size_t i = 0;
    while (i <= grid_n) {
      const bool positive = err[i] >= 0;
      std::size_t best = i;
      std::size_t j = i + 1;
      while (j <= grid_n && (err[j] >= 0) == positive) {
        if (std::abs(err[j]) > std::abs(err[best])) best = j;
        ++j;
      }
      Real t = grid[best];
      if (best > 0 && best < grid_n) t = refine_extremum(a, grid[best - 1], grid[best + 1]);
      ext.push_back(t);
      ext_err.push_back(std::abs(error_at(a, t)));
      i = j;
    }
    while (ext.size() > m) {
      if (ext_err.front() < ext_err.back()) {
        ext.erase(ext.begin());
        ext_err.erase(ext_err.begin());
      } else {
        ext.pop_back();
        ext_err.pop_back();
      }
    }
    if (ext.size() < m) break;  // reference cannot be improved on this grid
    const Real max_err = *std::max_element(ext_err.begin(), ext_err.end());
    ref = ext;
    if (max_err - level <= 1e-12L * max_err) break;
  }
  return a;
}

// Shifted Chebyshev series → monomial coefficients in x.
std::vector<Real> to_monomial(const std::vector<Real>& a) {
  const std::size_t n = a.size();
  std::vector<Real> out(n, 0), t0(n, 0), t1(n, 0);
  t0[0] = 1;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<Real>* cur;
    if (j == 0) {
      cur = &t0;
    } else if (j == 1) {
      t1.assign(n, 0);
      t1[0] = -1;
      t1[1] = 2;
      cur = &t1;
    } else {
      std::vector<Real> next(n, 0);
      for (std::size_t k = 0; k < n; ++k) {
        // 2(2x - 1)·T_{j-1} - T_{j-2}
        next[k] -= 2 * t1[k] + t0[k];
        if (k + 1 < n) next[k + 1] += 4 * t1[k];
      }
      t0 = t1;
      t1 = std::move(next);
      cur = &t1;
    }
    for (std::size_t k = 0; k < n; ++k) out[k] += a[j] * (*cur)[k];
  }
  return out;
}

}  // namespace

const std::vector<long double>& entropy_poly_coefficients(std::size_t degree) {
  static std::mutex mu;
  static std::map<std::size_t, std::vector<Real>> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(degree);
  if (it == cache.end()) it = cache.emplace(degree, to_monomial(remez_chebyshev(degree))).first;
  return it->second;
}

// JVHW --------------------------------------------------------------------

double entropy_jvhw(const Histogram& hist, const JvhwParams& params) {
  if (hist.total < 2) throw ValidationError("JVHW needs at least two samples");
  const Real n = static_cast<Real>(hist.total);
  if (params.variant == JvhwVariant::kMillerMadow) {
    const double k = static_cast<double>(hist.support_size());
    return std::max(0.0, entropy_mle(hist) + (k - 1.0) / (2.0 * static_cast<double>(n) * std::numbers::ln2));
  }

  const auto degree = std::min<std::size_t>(
      params.max_degree,
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(params.degree_scale * std::log(static_cast<double>(n))))));
  const std::vector<Real>& g = entropy_poly_coefficients(degree);
  const Real thres = std::min<Real>(1, params.threshold_scale * params.c1 * std::log(n) / n);

  Real total = 0;
  for (const auto& [sym, count] : hist.counts) {
    if (count == 0) continue;
    const Real c = static_cast<Real>(count);
    const Real x = c / n;
    const Real plugin = -x * std::log(x) + (1 - x) / (2 * n);
    const Real ratio = std::clamp<Real>(2 * x / thres - 1, 0, 1);
    Real value = plugin;
    if (ratio < 1) {
      // Σ_k g_k·Δ·Π_{j<k} (c − j)/(Δ·(n − j)): Δ times the unbiased estimate of
      // P(p/Δ), minus p̂·ln Δ.
      Real poly = 0;
      Real term = thres;
      for (std::size_t k = 0; k < g.size(); ++k) {
        poly += g[k] * term;
        const Real num = c - static_cast<Real>(k);
        if (num <= 0) break;
        term *= num / (thres * (n - static_cast<Real>(k)));
      }
      poly -= x * std::log(thres);
      if (!std::isfinite(poly)) poly = plugin;
      value = ratio * plugin + (1 - ratio) * poly;
    }
    total += std::max<Real>(value, 0);
  }
  return std::max(0.0, static_cast<double>(total / std::numbers::ln2_v<Real>));
}

double entropy_jvhw(std::span<const Symbol> samples, const JvhwParams& params) {
  return entropy_jvhw(histogram(samples), params);
}

EntropyReport entropy_report(const Histogram& hist, const JvhwParams& params) {
  EntropyReport r;
  r.h_mle = entropy_mle(hist);
  r.h_jvhw = hist.total >= 2 ? entropy_jvhw(hist, params) : 0.0;
  r.n_samples = hist.total;
  r.support_size = hist.support_size();
  return r;
}

std::vector<Symbol> to_byte_symbols(std::span<const double> values) {
  std::vector<Symbol> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<Symbol>(std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

double image_entropy(std::span<const double> image, Estimator estimator, const JvhwParams& params) {
  if (image.empty()) throw ValidationError("entropy of an empty image");
  const Histogram h = histogram(to_byte_symbols(image));
  return estimator == Estimator::kMle ? entropy_mle(h) : entropy_jvhw(h, params);
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

TextMetrics text_metrics(std::span<const TextPair> pairs, TextSide side) {
  if (pairs.empty()) throw ValidationError("text metrics need at least one pair");
  double bits_sum = 0.0;
  double size_sum = 0.0;
  std::uint64_t ones = 0, bits = 0;
  for (const TextPair& pair : pairs) {
    const std::string& word = side == TextSide::kBenign ? pair.benign_word : pair.adversarial_word;
    if (word.empty()) throw ValidationError("empty word in text pair");
    std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(word.data()), word.size());
    bits_sum += entropy_mle(histogram_of_bytes(bytes));
    size_sum += static_cast<double>(compressed_size(bytes));
    for (std::uint8_t b : bytes) ones += static_cast<std::uint64_t>(std::popcount(b));
    bits += 8 * bytes.size();
  }
  TextMetrics m;
  const double count = static_cast<double>(pairs.size());
  m.mean_bits_per_char = bits_sum / count;
  m.h_byte_wise = m.mean_bits_per_char / 8.0;
  m.h_bit_wise = binary_entropy(static_cast<double>(ones) / static_cast<double>(bits));
  m.compressed_size = size_sum / count;
  return m;
}

}  // namespace rlab
