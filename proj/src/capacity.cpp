#include "rlab/capacity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include "rlab/error.hpp"
#include "rlab/rng.hpp"

namespace rlab {

WeightMask WeightMask::all(std::size_t params, bool on) {
  return {std::vector<std::uint8_t>(params, on ? 1 : 0), on ? params : 0};
}

WeightMask WeightMask::random(std::size_t params, std::size_t count, std::uint64_t seed) {
  if (count > params) throw ValidationError("mask popcount exceeds parameter count");
  std::vector<std::size_t> idx(params);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  // partial Fisher–Yates: the first `count` slots are a uniform subset
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.below(params - i)]);
  WeightMask m{std::vector<std::uint8_t>(params, 0), count};
  for (std::size_t i = 0; i < count; ++i) m.mask[idx[i]] = 1;
  return m;
}

MlpModel apply_mask(const MlpModel& model, const WeightMask& mask, std::uint64_t seed) {
  if (mask.mask.size() != model.param_count()) {
    throw DimensionError("mask has " + std::to_string(mask.mask.size()) + " entries, model has " +
                         std::to_string(model.param_count()) + " parameters");
  }
  const auto ones = static_cast<std::size_t>(std::count_if(mask.mask.begin(), mask.mask.end(),
                                                           [](std::uint8_t b) { return b != 0; }));
  if (ones != mask.trainable_count) throw ValidationError("mask trainable_count does not match its popcount");
  const MlpModel fresh = mlp_init(model.layers(), seed);
  std::vector<double> params(fresh.params().begin(), fresh.params().end());
  std::vector<std::uint8_t> flags(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    flags[i] = mask.mask[i] != 0 ? 1 : 0;
    if (!flags[i]) params[i] = 0.0;
  }
  return MlpModel(model.layers(), std::move(params), seed, std::move(flags));
}

std::vector<LayerSpec> mlp_layers(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t classes) {
  std::vector<LayerSpec> layers;
  std::size_t in = input_dim;
  for (std::size_t h : hidden) {
    layers.push_back({in, h, Activation::kReLU});
    in = h;
  }
  layers.push_back({in, classes, Activation::kIdentity});
  param_count_for(layers);
  return layers;
}

void CapacityConfig::validate() const {
  if (arch.empty()) throw ValidationError("capacity architecture is empty");
  param_count_for(arch);
  train.validate();
  if (trials_per_size < 1) throw ValidationError("trials_per_size must be at least 1");
  if (budget_seconds && !(*budget_seconds > 0.0)) throw ValidationError("budget must be positive");
}

namespace {

double majority_frequency(const Dataset& data) {
  std::map<std::size_t, std::size_t> freq;
  for (const Example& ex : data.examples) ++freq[ex.label];
  std::size_t best = 0;
  for (const auto& [label, n] : freq) best = std::max(best, n);
  return static_cast<double>(best) / static_cast<double>(data.size());
}

bool reaches(double acc, double epsilon) { return acc >= 1.0 - epsilon - 1e-12; }

class Search {
 public:
  Search(const Dataset& data, const CapacityConfig& config)
      : data_(data), config_(config), start_(std::chrono::steady_clock::now()) {}

  bool out_of_budget() const {
    if (!config_.budget_seconds) return false;
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start_;
    return dt.count() >= *config_.budget_seconds;
  }

  // nullopt when the budget ran out before the size was decided.
  std::optional<CapacityProbe> probe(std::size_t size, double epsilon) {
    CapacityProbe p{size, 0.0, 0, false};
    const std::size_t trials = size == 0 ? 1 : config_.trials_per_size;
    for (std::size_t t = 0; t < trials; ++t) {
      auto it = cache_.find({size, t});
      if (it == cache_.end()) {
        if (out_of_budget()) return std::nullopt;
        it = cache_.emplace(std::pair{size, t}, capacity_trial(data_, config_, size, t)).first;
      }
      ++p.trials_run;
      p.best_train_accuracy = std::max(p.best_train_accuracy, it->second);
      if (reaches(it->second, epsilon)) {
        p.passed = true;
        break;
      }
    }
    return p;
  }

  CapacityResult run(double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
    CapacityResult r;
    r.epsilon = epsilon;
    r.total_params = param_count_for(config_.arch);
    r.trials_per_size = config_.trials_per_size;
    r.min_params = r.total_params;

    auto step = [&](std::size_t size) -> std::optional<bool> {
      auto p = probe(size, epsilon);
      if (!p) {
        r.budget_exhausted = true;
        return std::nullopt;
      }
      r.curve.push_back(*p);
      return p->passed;
    };

    const auto top = step(r.total_params);
    if (!top) return r;
    if (!*top) {
      r.exceeds_architecture = true;
      return r;
    }
    const auto zero = step(0);
    if (!zero) return r;
    if (*zero) {
      r.min_params = 0;
      return r;
    }
    std::size_t lo = 0, hi = r.total_params;  // lo fails, hi passes
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      const auto ok = step(mid);
      if (!ok) break;
      (*ok ? hi : lo) = mid;
    }
    r.min_params = hi;
    return r;
  }

 private:
  const Dataset& data_;
  const CapacityConfig& config_;
  std::chrono::steady_clock::time_point start_;
  std::map<std::pair<std::size_t, std::size_t>, double> cache_;
};

}  // namespace

double capacity_trial(const Dataset& data, const CapacityConfig& config, std::size_t size, std::size_t trial) {
  config.validate();
  data.validate();
  if (data.empty()) throw ValidationError("capacity needs a non-empty dataset");
  if (size == 0) return majority_frequency(data);
  const std::size_t total = param_count_for(config.arch);
  const WeightMask mask = WeightMask::random(total, size, derive_seed(config.seed, size, trial, 0));
  const MlpModel model = apply_mask(mlp_init(config.arch, 0), mask, derive_seed(config.seed, size, trial, 1));
  TrainConfig tc = config.train;
  tc.seed = derive_seed(config.seed, size, trial, 2);
  tc.stop_at_accuracy = 1.0;
  double best = accuracy(model, data);
  const TrainResult res = train(model, data, tc);
  for (double a : res.accuracy_curve) best = std::max(best, a);
  return best;
}

CapacityResult memorization_capacity(const Dataset& data, double epsilon, const CapacityConfig& config) {
  return memorization_capacity(data, std::span<const double>(&epsilon, 1), config).front();
}

std::vector<CapacityResult> memorization_capacity(const Dataset& data, std::span<const double> epsilons,
                                                  const CapacityConfig& config) {
  config.validate();
  data.validate();
  if (data.empty()) throw ValidationError("capacity needs a non-empty dataset");
  if (data.dim() != config.arch.front().input_dim) {
    throw DimensionError("dataset dimension does not match the architecture input");
  }
  Search search(data, config);
  std::vector<CapacityResult> out;
  for (double eps : epsilons) out.push_back(search.run(eps));
  return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("spearman inputs differ in length");
  if (a.size() < 2) throw ValidationError("spearman needs at least two points");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return std::nan("");
  return sab / std::sqrt(saa * sbb);
}

void RobustnessConfig::validate() const {
  attack.validate();
  if (attack.kind == AttackKind::kGaussianSnr) throw ValidationError("robustness sweep needs a gradient attack");
  finetune.validate();
  if (levels < 2) throw ValidationError("feature quantization needs at least 2 levels");
  if (!(clip_sigma > 0.0)) throw ValidationError("clip_sigma must be positive");
}

std::vector<std::vector<Symbol>> quantize_features(std::span<const std::vector<double>> features,
                                                  std::size_t levels, double clip_sigma) {
  double sum = 0, sum2 = 0, count = 0;
  for (const auto& f : features) {
    for (double v : f) {
      sum += v;
      sum2 += v * v;
      count += 1;
    }
  }
  const double mean = count > 0 ? sum / count : 0.0;
  const double sd = count > 0 ? std::sqrt(std::max(0.0, sum2 / count - mean * mean)) : 0.0;
  const auto top = static_cast<double>(levels - 1);
  std::vector<std::vector<Symbol>> out;
  out.reserve(features.size());
  for (const auto& f : features) {
    std::vector<Symbol> s(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double z = sd > 0 ? (f[i] - mean) / sd : 0.0;
      const double u = (z + clip_sigma) / (2 * clip_sigma) * static_cast<double>(levels);
      s[i] = static_cast<Symbol>(std::clamp(std::floor(u), 0.0, top));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<RobustnessPoint> robustness_sweep(const MlpModel& base, const Dataset& benign_train,
                                              std::span<const double> ratios, const Dataset& benign_test,
                                              const RobustnessConfig& config) {
  config.validate();
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (!(ratios[i] >= 0.0 && ratios[i] <= 1.0)) throw ValidationError("ratios must lie in [0, 1]");
    if (i > 0 && ratios[i] < ratios[i - 1]) throw ValidationError("ratios must be sorted ascending");
  }
  const AttackedDataset adv_train = attack_dataset(base, benign_train, config.attack);

  std::vector<RobustnessPoint> out;
  for (std::size_t ri = 0; ri < ratios.size(); ++ri) {
    const double r = ratios[ri];
    Dataset mixed = benign_train;
    const auto extra = static_cast<std::size_t>(std::lround(r * static_cast<double>(benign_train.size())));
    for (std::size_t i = 0; i < extra; ++i) mixed.examples.push_back(adv_train.data.examples[i]);

    TrainConfig tc = config.finetune;
    tc.seed = derive_seed(config.seed, ri);
    const MlpModel model = train(base, mixed, tc).model;

    const AttackedDataset adv_test = attack_dataset(model, benign_test, config.attack);
    RobustnessPoint p;
    p.adv_ratio = r;
    p.adv_test_accuracy = 1.0 - adv_test.success_rate();

    std::vector<std::vector<double>> feats;
    for (std::size_t i = 0; i < adv_test.data.size(); ++i) {
      if (!adv_test.success[i]) continue;
      const auto f = forward(model, adv_test.data.examples[i].input).features();
      feats.emplace_back(f.begin(), f.end());
    }
    p.successful = feats.size();
    if (!feats.empty()) {
      const auto symbols = quantize_features(feats, config.levels, config.clip_sigma);
      double h_mle = 0, h_jvhw = 0;
      for (const auto& s : symbols) {
        const Histogram h = histogram(s);
        h_mle += entropy_mle(h);
        h_jvhw += entropy_jvhw(h);
      }
      p.feature_entropy = h_mle / static_cast<double>(symbols.size());
      p.feature_entropy_jvhw = h_jvhw / static_cast<double>(symbols.size());
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace rlab
