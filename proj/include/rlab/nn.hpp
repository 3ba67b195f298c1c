#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rlab {

enum class Activation : std::uint32_t { kReLU = 0, kIdentity = 1, kSoftmax = 2 };

std::string to_string(Activation a);

struct LayerSpec {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Activation activation = Activation::kIdentity;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Example {
  std::vector<double> input;
  std::size_t label = 0;
};

struct Dataset {
  std::vector<Example> examples;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
  std::size_t dim() const noexcept { return examples.empty() ? 0 : examples.front().input.size(); }

  // Throws ValidationError unless all inputs share one dimension, lie in
  // [0,1], and every label is below num_classes.
  void validate() const;
};

// Dense feed-forward network. Parameters live in one flat vector laid out
// layer by layer: the output_dim x input_dim weight matrix (row-major, one
// row per output unit) followed by output_dim biases.
//
// A model is an immutable value; training and masking return new models.
class MlpModel {
 public:
  MlpModel(std::vector<LayerSpec> layers, std::vector<double> params, std::uint64_t seed,
           std::vector<std::uint8_t> trainable = {});

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::span<const double> params() const noexcept { return params_; }
  std::uint64_t seed() const noexcept { return seed_; }

  // Empty when every parameter is trainable; otherwise one flag per parameter.
  std::span<const std::uint8_t> trainable() const noexcept { return trainable_; }
  bool is_trainable(std::size_t i) const noexcept { return trainable_.empty() || trainable_[i] != 0; }

  std::size_t param_count() const noexcept { return params_.size(); }
  std::size_t input_dim() const noexcept { return layers_.front().input_dim; }
  std::size_t output_dim() const noexcept { return layers_.back().output_dim; }

  std::size_t weight_offset(std::size_t layer) const { return offsets_.at(layer); }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_.at(layer) + layers_.at(layer).input_dim * layers_.at(layer).output_dim;
  }

  MlpModel with_params(std::vector<double> params) const;

 private:
  std::vector<LayerSpec> layers_;
  std::vector<double> params_;
  std::vector<std::uint8_t> trainable_;
  std::vector<std::size_t> offsets_;
  std::uint64_t seed_;
};

// Σ (in·out + out) over layers; throws DimensionError if the specs don't chain.
std::size_t param_count_for(std::span<const LayerSpec> layers);

// Weights ~ U[-a, a] with a = sqrt(6 / (fan_in + fan_out)); biases start at 0.
MlpModel mlp_init(std::vector<LayerSpec> layers, std::uint64_t seed);

struct ForwardPass {
  // activations[0] is the input, activations[l + 1] the output of layer l.
  std::vector<std::vector<double>> activations;

  std::span<const double> logits() const { return activations.back(); }
  // Input to the final layer, i.e. the extracted feature vector T(x).
  std::span<const double> features() const { return activations[activations.size() - 2]; }
};

ForwardPass forward(const MlpModel& model, std::span<const double> input);

std::vector<double> softmax(std::span<const double> logits);
std::size_t argmax(std::span<const double> values);
std::size_t predict(const MlpModel& model, std::span<const double> input);

// Cross-entropy of softmax(logits) against `label`, in nats.
double cross_entropy(std::span<const double> logits, std::size_t label);
double loss(const MlpModel& model, std::span<const double> input, std::size_t label);

// ∂(Σ_k logit_weights[k]·logit_k)/∂input for the given forward pass.
std::vector<double> logit_gradient(const MlpModel& model, const ForwardPass& pass,
                                   std::span<const double> logit_weights);

// ∂loss/∂input, loss being cross-entropy on softmax.
std::vector<double> grad_input(const MlpModel& model, std::span<const double> input,
                               std::size_t label);

// ∂loss/∂params in the flat parameter layout.
std::vector<double> grad_params(const MlpModel& model, std::span<const double> input,
                                std::size_t label);

enum class LossKind { kCrossEntropy };

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 30;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kCrossEntropy;
  // Stop after the first epoch whose train accuracy reaches this value.
  std::optional<double> stop_at_accuracy;

  void validate() const;
};

struct TrainResult {
  MlpModel model;
  // Train accuracy measured after each completed epoch.
  std::vector<double> accuracy_curve;
};

// Mini-batch SGD with per-epoch shuffling seeded by (config.seed, epoch).
// Non-trainable parameters are never updated.
TrainResult train(const MlpModel& model, const Dataset& data, const TrainConfig& config);

double accuracy(const MlpModel& model, const Dataset& data);

// First epoch (1-based) at which the curve reaches `target`, if any.
std::optional<std::size_t> epochs_to_accuracy(std::span<const double> curve, double target);

// RLAB container: "RLAB", u32 version, u32 layer count, per layer
// (u32 in, u32 out, u32 activation), u64 seed, u64 param count, then
// little-endian f64 parameters.
std::vector<std::uint8_t> serialize_model(const MlpModel& model);
MlpModel deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace rlab
