#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rlab/attacks.hpp"
#include "rlab/entropy.hpp"
#include "rlab/nn.hpp"

namespace rlab {

// One flag per parameter in the flat layout; 1 = trainable, 0 = pinned at zero.
struct WeightMask {
  std::vector<std::uint8_t> mask;
  std::size_t trainable_count = 0;

  static WeightMask all(std::size_t params, bool on);
  // Uniform among masks with exactly `count` set entries.
  static WeightMask random(std::size_t params, std::size_t count, std::uint64_t seed);
};

// Re-initializes the architecture from `seed`, zeroes masked entries and marks
// them untrainable.
MlpModel apply_mask(const MlpModel& model, const WeightMask& mask, std::uint64_t seed);

// ReLU hidden layers, identity logits.
std::vector<LayerSpec> mlp_layers(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t classes);

inline TrainConfig make_train_config(double learning_rate, std::size_t max_epochs) {
  TrainConfig c;
  c.learning_rate = learning_rate;
  c.max_epochs = max_epochs;
  return c;
}

struct CapacityConfig {
  std::vector<LayerSpec> arch;
  TrainConfig train = make_train_config(0.1, 30);
  std::size_t trials_per_size = 5;
  std::uint64_t seed = 0;
  std::optional<double> budget_seconds;

  void validate() const;
};

struct CapacityProbe {
  std::size_t param_count = 0;
  double best_train_accuracy = 0.0;  // best over trials and epochs
  std::size_t trials_run = 0;
  bool passed = false;
};

struct CapacityResult {
  double epsilon = 0.0;
  std::size_t min_params = 0;
  std::size_t total_params = 0;
  std::size_t trials_per_size = 0;
  std::vector<CapacityProbe> curve;  // in probe order
  bool exceeds_architecture = false;  // even the full model failed
  bool budget_exhausted = false;      // search stopped early; min_params is an upper bound
};

// Best train accuracy of trial `trial` at `size` trainable parameters; the
// mask and init derive from (seed, size, trial). Size 0 is the best constant
// predictor, i.e. the majority-class frequency.
double capacity_trial(const Dataset& data, const CapacityConfig& config, std::size_t size, std::size_t trial);

// Binary search for the smallest trainable-parameter count at which some of
// `trials_per_size` random masks reaches train accuracy ≥ 1 − epsilon.
CapacityResult memorization_capacity(const Dataset& data, double epsilon, const CapacityConfig& config);

// Same search for several tolerances; trial outcomes are cached and shared.
std::vector<CapacityResult> memorization_capacity(const Dataset& data, std::span<const double> epsilons,
                                                  const CapacityConfig& config);

// Spearman rank correlation with average ranks for ties. NaN when either
// side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

struct RobustnessConfig {
  AttackConfig attack;
  TrainConfig finetune = make_train_config(0.05, 10);
  // Features are standardized over all successful examples, then uniformly
  // quantized to `levels` bins across ±clip_sigma.
  std::size_t levels = 16;
  double clip_sigma = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RobustnessPoint {
  double adv_ratio = 0.0;
  double adv_test_accuracy = 0.0;
  double feature_entropy = 0.0;  // mean per-example MLE, bits
  double feature_entropy_jvhw = 0.0;
  std::size_t successful = 0;
};

// Per-example feature symbols for a batch of feature vectors.
std::vector<std::vector<Symbol>> quantize_features(std::span<const std::vector<double>> features,
                                                  std::size_t levels, double clip_sigma);

// For each ratio r: fine-tune `base` on benign_train plus the first
// round(r·n) adversarial versions of it (crafted against `base`), attack
// benign_test against the fine-tuned model, and measure the entropy of the
// penultimate activations of the successful adversarial inputs.
std::vector<RobustnessPoint> robustness_sweep(const MlpModel& base, const Dataset& benign_train,
                                              std::span<const double> ratios, const Dataset& benign_test,
                                              const RobustnessConfig& config);

}  // namespace rlab
