#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rlab/nn.hpp"

namespace rlab {

enum class AttackKind { kFgsm, kDeepFool, kCwL2, kGaussianSnr };

std::string to_string(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);

// Adam uses β1 = 0.9, β2 = 0.999, ε = 1e-8 on the tanh-space variable.
enum class CwOptimizer { kAdam, kGradientDescent };

std::string to_string(CwOptimizer opt);

inline constexpr double kSnrInfinity = std::numeric_limits<double>::infinity();

struct AttackConfig {
  AttackKind kind = AttackKind::kFgsm;
  double epsilon = 0.25;  // FGSM L∞ step
  std::size_t max_iter = 50;
  double overshoot = 0.02;
  double c = 1.0;  // CW margin weight
  std::size_t steps = 200;
  double step_size = 0.05;
  CwOptimizer cw_optimizer = CwOptimizer::kAdam;
  double snr = kSnrInfinity;
  bool clip = true;

  void validate() const;
};

struct AttackResult {
  std::vector<double> adv_input;
  bool success = false;  // model(adv_input) != ground-truth label
  double perturbation_l2 = 0.0;
  double perturbation_linf = 0.0;
  std::size_t queries = 0;  // gradient evaluations
};

// x' = clip(x + ε·sign(∂loss/∂x)).
AttackResult fgsm(const MlpModel& model, std::span<const double> input, std::size_t label,
                  const AttackConfig& config);

// Untargeted multi-class DeepFool against all competitor classes. Each step
// moves to the linearized nearest boundary; the accumulated perturbation is
// scaled by (1 + overshoot).
AttackResult deepfool(const MlpModel& model, std::span<const double> input, std::size_t label,
                      const AttackConfig& config);

// Carlini–Wagner L2 with x' = (tanh(w) + 1)/2, minimizing
// ‖x' − x‖² + c·max(Z_label − max_{j≠label} Z_j, 0) for `steps` iterations.
// Returns the smallest-L2 successful iterate, else the last iterate.
AttackResult cw_l2(const MlpModel& model, std::span<const double> input, std::size_t label,
                   const AttackConfig& config);

// Dispatches on config.kind (not valid for kGaussianSnr).
AttackResult run_attack(const MlpModel& model, std::span<const double> input, std::size_t label,
                        const AttackConfig& config);

// Per example: x + N(0, σ²) with σ² = mean(x²)/snr, clipped to [0,1].
// snr = kSnrInfinity returns the dataset unchanged.
Dataset gaussian_snr(const Dataset& data, double snr, std::uint64_t seed);

struct AttackedDataset {
  Dataset data;  // adversarial inputs with the original labels
  std::vector<bool> success;
  std::vector<double> l2;
  std::vector<double> linf;
  std::vector<std::size_t> queries;

  double success_rate() const;
};

AttackedDataset attack_dataset(const MlpModel& model, const Dataset& data, const AttackConfig& config);

// JSON sidecar recording the config, seed, and per-example statistics.
std::string attack_sidecar_json(const AttackConfig& config, std::uint64_t seed, const AttackedDataset& result);

}  // namespace rlab
