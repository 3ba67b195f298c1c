#include "rlab/attacks.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "rlab/error.hpp"
#include "rlab/rng.hpp"

namespace rlab {

namespace {

void finish(AttackResult& r, const MlpModel& model, std::span<const double> input, std::size_t label) {
  double l2 = 0.0, linf = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double d = r.adv_input[i] - input[i];
    l2 += d * d;
    linf = std::max(linf, std::abs(d));
  }
  r.perturbation_l2 = std::sqrt(l2);
  r.perturbation_linf = linf;
  r.success = predict(model, r.adv_input) != label;
}

void clip_unit(std::vector<double>& v) {
  for (double& x : v) x = std::clamp(x, 0.0, 1.0);
}

std::vector<double> one_hot(std::size_t n, std::size_t k, double value = 1.0) {
  std::vector<double> v(n, 0.0);
  v[k] = value;
  return v;
}

}  // namespace

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kFgsm:
      return "fgsm";
    case AttackKind::kDeepFool:
      return "deepfool";
    case AttackKind::kCwL2:
      return "cw";
    case AttackKind::kGaussianSnr:
      return "gaussian";
  }
  return "unknown";
}

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "fgsm") return AttackKind::kFgsm;
  if (name == "deepfool") return AttackKind::kDeepFool;
  if (name == "cw" || name == "cw-l2" || name == "cwl2") return AttackKind::kCwL2;
  if (name == "gaussian" || name == "snr") return AttackKind::kGaussianSnr;
  throw ValidationError("unknown attack '" + name + "'");
}

std::string to_string(CwOptimizer opt) {
  return opt == CwOptimizer::kAdam ? "adam" : "gradient-descent";
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be non-negative");
  if (!(snr > 0.0)) throw ValidationError("snr must be positive");
  if (max_iter < 1) throw ValidationError("max_iter must be at least 1");
  if (!(c > 0.0)) throw ValidationError("CW constant c must be positive");
  if (!(step_size >= 0.0)) throw ValidationError("step size must be non-negative");
  if (!(overshoot >= 0.0)) throw ValidationError("overshoot must be non-negative");
}

AttackResult fgsm(const MlpModel& model, std::span<const double> input, std::size_t label,
                  const AttackConfig& config) {
  config.validate();
  const std::vector<double> g = grad_input(model, input, label);
  AttackResult r;
  r.adv_input.assign(input.begin(), input.end());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
    r.adv_input[i] += config.epsilon * s;
  }
  if (config.clip) clip_unit(r.adv_input);
  r.queries = 1;
  finish(r, model, input, label);
  return r;
}

AttackResult deepfool(const MlpModel& model, std::span<const double> input, std::size_t label,
                      const AttackConfig& config) {
  config.validate();
  const std::size_t classes = model.output_dim();
  const std::size_t dim = input.size();
  AttackResult r;
  r.adv_input.assign(input.begin(), input.end());
  std::vector<double> total(dim, 0.0);

  for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
    const ForwardPass pass = forward(model, r.adv_input);
    const auto z = pass.logits();
    if (argmax(z) != label) break;
    const std::vector<double> g_true = logit_gradient(model, pass, one_hot(classes, label));
    ++r.queries;

    double best_ratio = std::numeric_limits<double>::infinity();
    double best_gap = 0.0;
    std::vector<double> best_w;
    for (std::size_t k = 0; k < classes; ++k) {
      if (k == label) continue;
      std::vector<double> w = logit_gradient(model, pass, one_hot(classes, k));
      ++r.queries;
      double norm2 = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        w[i] -= g_true[i];
        norm2 += w[i] * w[i];
      }
      if (norm2 == 0.0) continue;
      const double gap = std::abs(z[k] - z[label]);
      const double ratio = gap / std::sqrt(norm2);
      if (ratio < best_ratio) {
        best_ratio = ratio;
        best_gap = gap;
        best_w = std::move(w);
      }
    }
    if (best_w.empty()) break;  // flat logits: no direction to move

    double norm2 = 0.0;
    for (double v : best_w) norm2 += v * v;
    const double step = best_gap / norm2;
    for (std::size_t i = 0; i < dim; ++i) {
      total[i] += step * best_w[i];
      r.adv_input[i] = input[i] + (1.0 + config.overshoot) * total[i];
    }
    if (config.clip) clip_unit(r.adv_input);
  }
  finish(r, model, input, label);
  return r;
}

AttackResult cw_l2(const MlpModel& model, std::span<const double> input, std::size_t label,
                   const AttackConfig& config) {
  config.validate();
  const std::size_t classes = model.output_dim();
  const std::size_t dim = input.size();
  AttackResult best;
  best.adv_input.assign(input.begin(), input.end());
  if (config.steps == 0 || predict(model, input) != label) {
    finish(best, model, input, label);
    return best;
  }

  constexpr double kBox = 1.0 - 1e-6;
  std::vector<double> w(dim), x(dim), m1(dim, 0.0), m2(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) w[i] = std::atanh((2.0 * input[i] - 1.0) * kBox);

  bool found = false;
  double best_l2 = std::numeric_limits<double>::infinity();
  std::size_t queries = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    double l2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      x[i] = (std::tanh(w[i]) + 1.0) / 2.0;
      l2 += (x[i] - input[i]) * (x[i] - input[i]);
    }
    const ForwardPass pass = forward(model, x);
    const auto z = pass.logits();
    std::size_t runner = label == 0 ? 1 : 0;
    for (std::size_t k = 0; k < classes; ++k) {
      if (k != label && z[k] > z[runner]) runner = k;
    }
    const double margin = z[label] - z[runner];
    if (argmax(z) != label && l2 < best_l2) {
      best_l2 = l2;
      best.adv_input = x;
      found = true;
    }
    if (!std::isfinite(l2 + config.c * std::max(margin, 0.0))) throw NumericError("non-finite CW loss");

    std::vector<double> grad(dim);
    for (std::size_t i = 0; i < dim; ++i) grad[i] = 2.0 * (x[i] - input[i]);
    if (margin > 0.0) {
      std::vector<double> coeffs(classes, 0.0);
      coeffs[label] = config.c;
      coeffs[runner] = -config.c;
      const std::vector<double> gm = logit_gradient(model, pass, coeffs);
      ++queries;
      for (std::size_t i = 0; i < dim; ++i) grad[i] += gm[i];
    }
    for (std::size_t i = 0; i < dim; ++i) {
      const double t = std::tanh(w[i]);
      const double g = grad[i] * 0.5 * (1.0 - t * t);
      if (config.cw_optimizer == CwOptimizer::kGradientDescent) {
        w[i] -= config.step_size * g;
        continue;
      }
      m1[i] = 0.9 * m1[i] + 0.1 * g;
      m2[i] = 0.999 * m2[i] + 0.001 * g * g;
      const double mh = m1[i] / (1.0 - std::pow(0.9, step + 1));
      const double vh = m2[i] / (1.0 - std::pow(0.999, step + 1));
      w[i] -= config.step_size * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  if (!found) {
    for (std::size_t i = 0; i < dim; ++i) best.adv_input[i] = (std::tanh(w[i]) + 1.0) / 2.0;
  }
  best.queries = queries;
  finish(best, model, input, label);
  return best;
}

AttackResult run_attack(const MlpModel& model, std::span<const double> input, std::size_t label,
                        const AttackConfig& config) {
  switch (config.kind) {
    case AttackKind::kFgsm:
      return fgsm(model, input, label, config);
    case AttackKind::kDeepFool:
      return deepfool(model, input, label, config);
    case AttackKind::kCwL2:
      return cw_l2(model, input, label, config);
    case AttackKind::kGaussianSnr:
      break;
  }
  throw ValidationError("gaussian noise is a dataset transform, not a per-example attack");
}

Dataset gaussian_snr(const Dataset& data, double snr, std::uint64_t seed) {
  if (!(snr > 0.0)) throw ValidationError("snr must be positive");
  if (std::isinf(snr)) return data;
  Dataset out = data;
  for (std::size_t n = 0; n < out.size(); ++n) {
    auto& x = out.examples[n].input;
    double power = 0.0;
    for (double v : x) power += v * v;
    power /= static_cast<double>(x.size());
    const double sigma = std::sqrt(power / snr);
    Rng rng(derive_seed(seed, n));
    for (double& v : x) v = std::clamp(v + sigma * rng.normal(), 0.0, 1.0);
  }
  return out;
}

double AttackedDataset::success_rate() const {
  if (success.empty()) return 0.0;
  return static_cast<double>(std::count(success.begin(), success.end(), true)) /
         static_cast<double>(success.size());
}

AttackedDataset attack_dataset(const MlpModel& model, const Dataset& data, const AttackConfig& config) {
  AttackedDataset out;
  out.data.num_classes = data.num_classes;
  out.data.examples.reserve(data.size());
  for (const Example& ex : data.examples) {
    AttackResult r = run_attack(model, ex.input, ex.label, config);
    out.success.push_back(r.success);
    out.l2.push_back(r.perturbation_l2);
    out.linf.push_back(r.perturbation_linf);
    out.queries.push_back(r.queries);
    out.data.examples.push_back({std::move(r.adv_input), ex.label});
  }
  return out;
}

std::string attack_sidecar_json(const AttackConfig& config, std::uint64_t seed, const AttackedDataset& result) {
  nlohmann::ordered_json j;
  j["attack"] = to_string(config.kind);
  j["config"] = {{"epsilon", config.epsilon}, {"max_iter", config.max_iter}, {"overshoot", config.overshoot},
                 {"c", config.c},           {"steps", config.steps},       {"step_size", config.step_size},
                 {"clip", config.clip},     {"cw_optimizer", to_string(config.cw_optimizer)}};
  j["seed"] = seed;
  j["count"] = result.success.size();
  j["success_rate"] = result.success_rate();
  auto per = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < result.success.size(); ++i) {
    per.push_back({{"index", i},
                   {"success", static_cast<bool>(result.success[i])},
                   {"l2", result.l2[i]},
                   {"linf", result.linf[i]},
                   {"queries", result.queries[i]}});
  }
  j["examples"] = std::move(per);
  return j.dump(2) + "\n";
}

}  // namespace rlab
