#include "rlab/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bytes.hpp"
#include "rlab/error.hpp"
#include "rlab/rng.hpp"

namespace rlab {

namespace {

constexpr std::uint32_t kModelVersion = 1;

bool is_output_activation(Activation a) { return a == Activation::kSoftmax; }

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in ") + what);
  }
}

// Forward pass into preallocated buffers; acts[0] must already hold the input.
void forward_into(const MlpModel& model, std::vector<std::vector<double>>& acts) {
  const auto params = model.params();
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& spec = layers[l];
    const double* w = params.data() + model.weight_offset(l);
    const double* b = params.data() + model.bias_offset(l);
    const std::vector<double>& in = acts[l];
    std::vector<double>& out = acts[l + 1];
    out.resize(spec.output_dim);
    for (std::size_t o = 0; o < spec.output_dim; ++o) {
      const double* row = w + o * spec.input_dim;
      double z = b[o];
      for (std::size_t i = 0; i < spec.input_dim; ++i) z += row[i] * in[i];
      out[o] = (spec.activation == Activation::kReLU && z < 0.0) ? 0.0 : z;
    }
  }
}

// Backpropagates `delta` (∂/∂logits) through the network. Accumulates
// parameter gradients into `param_grad` when non-empty and writes the input
// gradient into `input_grad` when non-null.
void backward_into(const MlpModel& model, const std::vector<std::vector<double>>& acts,
                   std::vector<double> delta, std::span<double> param_grad,
                   std::vector<double>* input_grad) {
  const auto params = model.params();
  const auto& layers = model.layers();
  std::vector<double> prev;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const LayerSpec& spec = layers[l];
    const double* w = params.data() + model.weight_offset(l);
    const std::vector<double>& in = acts[l];
    const bool need_prev = l > 0 || input_grad != nullptr;
    if (!param_grad.empty()) {
      double* gw = param_grad.data() + model.weight_offset(l);
      double* gb = param_grad.data() + model.bias_offset(l);
      for (std::size_t o = 0; o < spec.output_dim; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* grow = gw + o * spec.input_dim;
        for (std::size_t i = 0; i < spec.input_dim; ++i) grow[i] += d * in[i];
        gb[o] += d;
      }
    }
    if (!need_prev) break;
    prev.assign(spec.input_dim, 0.0);
    for (std::size_t o = 0; o < spec.output_dim; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * spec.input_dim;
      for (std::size_t i = 0; i < spec.input_dim; ++i) prev[i] += row[i] * d;
    }
    if (l > 0 && layers[l - 1].activation == Activation::kReLU) {
      for (std::size_t i = 0; i < prev.size(); ++i) {
        if (in[i] <= 0.0) prev[i] = 0.0;
      }
    }
    delta.swap(prev);
  }
  if (input_grad != nullptr) *input_grad = std::move(delta);
}

std::vector<double> loss_delta(std::span<const double> logits, std::size_t label) {
  std::vector<double> delta = softmax(logits);
  delta[label] -= 1.0;
  return delta;
}

void check_input(const MlpModel& model, std::span<const double> input) {
  if (input.size() != model.input_dim()) {
    throw DimensionError("input has dimension " + std::to_string(input.size()) + ", model expects " +
                         std::to_string(model.input_dim()));
  }
}

void check_label(const MlpModel& model, std::size_t label) {
  if (label >= model.output_dim()) {
    throw DimensionError("label " + std::to_string(label) + " out of range for " +
                         std::to_string(model.output_dim()) + " outputs");
  }
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kReLU:
      return "relu";
    case Activation::kIdentity:
      return "identity";
    case Activation::kSoftmax:
      return "softmax";
  }
  return "unknown";
}

void Dataset::validate() const {
  if (num_classes == 0) throw ValidationError("dataset has zero classes");
  const std::size_t d = dim();
  for (std::size_t n = 0; n < examples.size(); ++n) {
    const Example& ex = examples[n];
    if (ex.input.size() != d) {
      throw ValidationError("example " + std::to_string(n) + " has dimension " +
                            std::to_string(ex.input.size()) + ", expected " + std::to_string(d));
    }
    if (ex.label >= num_classes) {
      throw ValidationError("example " + std::to_string(n) + " label " + std::to_string(ex.label) +
                            " >= num_classes " + std::to_string(num_classes));
    }
    for (double v : ex.input) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError("example " + std::to_string(n) + " has value outside [0,1]");
      }
    }
  }
}

std::size_t param_count_for(std::span<const LayerSpec> layers) {
  if (layers.empty()) throw DimensionError("model needs at least one layer");
  std::size_t total = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& s = layers[l];
    if (s.input_dim == 0 || s.output_dim == 0) {
      throw DimensionError("layer " + std::to_string(l) + " has a zero dimension");
    }
    if (l + 1 < layers.size()) {
      if (is_output_activation(s.activation)) {
        throw DimensionError("softmax is only allowed on the final layer");
      }
      if (s.output_dim != layers[l + 1].input_dim) {
        throw DimensionError("layer " + std::to_string(l) + " outputs " + std::to_string(s.output_dim) +
                             " but layer " + std::to_string(l + 1) + " expects " +
                             std::to_string(layers[l + 1].input_dim));
      }
    }
    total += s.input_dim * s.output_dim + s.output_dim;
  }
  return total;
}

MlpModel::MlpModel(std::vector<LayerSpec> layers, std::vector<double> params, std::uint64_t seed,
                   std::vector<std::uint8_t> trainable)
    : layers_(std::move(layers)), params_(std::move(params)), trainable_(std::move(trainable)), seed_(seed) {
  const std::size_t expected = param_count_for(layers_);
  if (params_.size() != expected) {
    throw DimensionError("parameter vector has " + std::to_string(params_.size()) + " entries, layout needs " +
                         std::to_string(expected));
  }
  if (!trainable_.empty() && trainable_.size() != expected) {
    throw DimensionError("trainable mask length does not match parameter count");
  }
  check_finite(params_, "model parameters");
  offsets_.reserve(layers_.size());
  std::size_t off = 0;
  for (const LayerSpec& s : layers_) {
    offsets_.push_back(off);
    off += s.input_dim * s.output_dim + s.output_dim;
  }
}

MlpModel MlpModel::with_params(std::vector<double> params) const {
  return MlpModel(layers_, std::move(params), seed_, trainable_);
}

MlpModel mlp_init(std::vector<LayerSpec> layers, std::uint64_t seed) {
  const std::size_t total = param_count_for(layers);
  std::vector<double> params(total, 0.0);
  Rng rng(derive_seed(seed, 0x1A17));
  std::size_t off = 0;
  for (const LayerSpec& s : layers) {
    const double a = std::sqrt(6.0 / static_cast<double>(s.input_dim + s.output_dim));
    const std::size_t nw = s.input_dim * s.output_dim;
    for (std::size_t i = 0; i < nw; ++i) params[off + i] = rng.uniform(-a, a);
    off += nw + s.output_dim;
  }
  return MlpModel(std::move(layers), std::move(params), seed);
}

ForwardPass forward(const MlpModel& model, std::span<const double> input) {
  check_input(model, input);
  ForwardPass pass;
  pass.activations.resize(model.layers().size() + 1);
  pass.activations[0].assign(input.begin(), input.end());
  forward_into(model, pass.activations);
  return pass;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::size_t predict(const MlpModel& model, std::span<const double> input) {
  return argmax(forward(model, input).logits());
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  return std::log(sum) + m - logits[label];
}

double loss(const MlpModel& model, std::span<const double> input, std::size_t label) {
  check_label(model, label);
  return cross_entropy(forward(model, input).logits(), label);
}

std::vector<double> logit_gradient(const MlpModel& model, const ForwardPass& pass,
                                   std::span<const double> logit_weights) {
  if (logit_weights.size() != model.output_dim()) throw DimensionError("logit weight vector has wrong length");
  std::vector<double> g;
  backward_into(model, pass.activations, std::vector<double>(logit_weights.begin(), logit_weights.end()), {},
                &g);
  return g;
}

std::vector<double> grad_input(const MlpModel& model, std::span<const double> input, std::size_t label) {
  check_label(model, label);
  const ForwardPass pass = forward(model, input);
  std::vector<double> g;
  backward_into(model, pass.activations, loss_delta(pass.logits(), label), {}, &g);
  return g;
}

std::vector<double> grad_params(const MlpModel& model, std::span<const double> input, std::size_t label) {
  check_label(model, label);
  const ForwardPass pass = forward(model, input);
  std::vector<double> g(model.param_count(), 0.0);
  backward_into(model, pass.activations, loss_delta(pass.logits(), label), g, nullptr);
  return g;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning rate must be finite and non-negative");
  }
  if (batch_size == 0) throw ValidationError("batch size must be positive");
}

double accuracy(const MlpModel& model, const Dataset& data) {
  if (data.empty()) throw ValidationError("accuracy of an empty dataset");
  std::vector<std::vector<double>> acts(model.layers().size() + 1);
  std::size_t correct = 0;
  for (const Example& ex : data.examples) {
    check_input(model, ex.input);
    acts[0] = ex.input;
    forward_into(model, acts);
    if (argmax(acts.back()) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train(const MlpModel& model, const Dataset& data, const TrainConfig& config) {
  config.validate();
  if (data.empty()) throw ValidationError("cannot train on an empty dataset");
  const std::size_t n = data.size();
  for (const Example& ex : data.examples) {
    check_input(model, ex.input);
    check_label(model, ex.label);
  }

  std::vector<double> params(model.params().begin(), model.params().end());
  std::vector<double> grad(params.size(), 0.0);
  std::vector<std::size_t> order(n);
  std::vector<double> curve;
  std::vector<std::vector<double>> acts(model.layers().size() + 1);
  MlpModel current = model;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, epoch));
    rng.shuffle(std::span<std::size_t>(order));

    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const Example& ex = data.examples[order[k]];
        acts[0] = ex.input;
        forward_into(current, acts);
        batch_loss += cross_entropy(acts.back(), ex.label);
        backward_into(current, acts, loss_delta(acts.back(), ex.label), grad, nullptr);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch + 1));
      }
      const double scale = config.learning_rate / static_cast<double>(stop - start);
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (current.is_trainable(i)) params[i] -= scale * grad[i];
      }
      check_finite(params, "trained parameters");
      current = current.with_params(params);
    }
    curve.push_back(accuracy(current, data));
    if (config.stop_at_accuracy && curve.back() >= *config.stop_at_accuracy) break;
  }
  return TrainResult{std::move(current), std::move(curve)};
}

std::optional<std::size_t> epochs_to_accuracy(std::span<const double> curve, double target) {
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i] >= target) return i + 1;
  }
  return std::nullopt;
}

std::vector<std::uint8_t> serialize_model(const MlpModel& model) {
  std::vector<std::uint8_t> out = {'R', 'L', 'A', 'B'};
  detail::put_le32(out, kModelVersion);
  detail::put_le32(out, static_cast<std::uint32_t>(model.layers().size()));
  for (const LayerSpec& s : model.layers()) {
    detail::put_le32(out, static_cast<std::uint32_t>(s.input_dim));
    detail::put_le32(out, static_cast<std::uint32_t>(s.output_dim));
    detail::put_le32(out, static_cast<std::uint32_t>(s.activation));
  }
  detail::put_le64(out, model.seed());
  detail::put_le64(out, model.param_count());
  for (double p : model.params()) detail::put_le64(out, std::bit_cast<std::uint64_t>(p));
  return out;
}

MlpModel deserialize_model(std::span<const std::uint8_t> bytes) {
  detail::Reader r(bytes);
  auto magic = r.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), "RLAB")) throw ParseError("bad model magic", 0);
  const std::size_t version_at = r.offset();
  if (r.le32("version") != kModelVersion) throw ParseError("unsupported model version", version_at);
  const std::uint32_t count = r.le32("layer count");
  if (count == 0 || count > 1024) throw ParseError("implausible layer count", 8);
  std::vector<LayerSpec> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    LayerSpec s;
    s.input_dim = r.le32("layer dims");
    s.output_dim = r.le32("layer dims");
    const std::size_t act_at = r.offset();
    const std::uint32_t act = r.le32("activation");
    if (act > 2) throw ParseError("unknown activation code", act_at);
    s.activation = static_cast<Activation>(act);
    layers.push_back(s);
  }
  const std::uint64_t seed = r.le64("seed");
  const std::size_t count_at = r.offset();
  const std::uint64_t n = r.le64("param count");
  std::size_t expected = 0;
  try {
    expected = param_count_for(layers);
  } catch (const DimensionError& e) {
    throw ParseError(std::string("invalid layer layout: ") + e.what(), 12);
  }
  if (n != expected) throw ParseError("param count does not match layer layout", count_at);
  if (r.remaining() != n * 8) throw ParseError("param payload has wrong length", r.offset());
  std::vector<double> params(n);
  for (auto& p : params) p = std::bit_cast<double>(r.le64("params"));
  try {
    return MlpModel(std::move(layers), std::move(params), seed);
  } catch (const NumericError&) {
    throw ParseError("non-finite parameter in payload", count_at + 8);
  }
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  detail::write_file(path, serialize_model(model));
}

MlpModel load_model(const std::filesystem::path& path) { return deserialize_model(detail::read_file(path)); }

}  // namespace rlab
