#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "rlab/attacks.hpp"
#include "rlab/capacity.hpp"
#include "rlab/complexity.hpp"
#include "rlab/dataio.hpp"
#include "rlab/entropy.hpp"
#include "rlab/error.hpp"
#include "rlab/infotheory.hpp"
#include "rlab/nxor.hpp"
#include "rlab/plot.hpp"
#include "rlab/rng.hpp"

namespace rlab::cli {

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) throw ValidationError("empty entry in list '" + text + "'");
    if (item == "inf" || item == "infinity") {
      out.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ValidationError("'" + item + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("empty number list");
  return out;
}

std::string sha256_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[65536];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{md[i]};
  return hex.str();
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["subcommand"] = subcommand;
  j["version"] = version;
  j["seed"] = seed;
  j["config"] = config;
  j["input_digests"] = input_digests;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  return j.dump(2) + "\n";
}

std::vector<SnrPoint> snr_sweep(const MlpModel& model, const Dataset& data, std::span<const double> snrs,
                                std::uint64_t seed, std::size_t noise_seeds) {
  if (noise_seeds < 1) throw ValidationError("need at least one noise seed");
  std::vector<SnrPoint> out;
  for (std::size_t i = 0; i < snrs.size(); ++i) {
    std::vector<double> accs;
    for (std::size_t s = 0; s < noise_seeds; ++s) {
      accs.push_back(accuracy(model, gaussian_snr(data, snrs[i], derive_seed(seed, i, s))));
      if (std::isinf(snrs[i])) break;  // noise-free: every seed agrees
    }
    std::sort(accs.begin(), accs.end());
    const std::size_t n = accs.size();
    const double median = n % 2 ? accs[n / 2] : (accs[n / 2 - 1] + accs[n / 2]) / 2.0;
    out.push_back({snrs[i], median});
  }
  return out;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Options {
  std::uint64_t seed = 0;
  std::string dataset = "synth";
  std::string labels;
  std::string test_dataset;
  std::string test_labels;
  std::size_t limit = 0;
  std::size_t train_size = 500;
  std::size_t test_size = 200;

  std::size_t hidden = 64;
  std::size_t epochs = 30;
  double learning_rate = 0.05;
  std::size_t batch_size = 16;
  std::string model;
  std::string save_model;

  std::string attack = "fgsm";
  double epsilon = 0.25;
  std::size_t steps = 200;
  std::size_t max_iter = 50;
  double cw_c = 1.0;
  double step_size = 0.05;
  double overshoot = 0.02;
  std::string cw_optimizer = "adam";
  double snr = 1.0;

  std::string out;
  std::string format = "csv";
  std::string config;

  int quality = kComplexityQuality;
  std::string quality_list = "1,5,10,20,30,50,75,100";
  bool dump_qtable = false;
  std::string ratios = "0,0.1,0.25,0.5,1";
  std::string epsilon_list = "0.05,0.1,0.2";
  std::size_t trials = 0;  // 0 = subcommand default
  double budget_seconds = 0.0;
  std::size_t finetune_epochs = 10;
  std::size_t redundant_bits = 1;
  std::string base_weights;
  std::string system;
  std::string snr_list = "inf,100,10,1,0.5,0.1";
  std::size_t noise_seeds = 3;
  std::string text_pairs;
};

class Context {
 public:
  Context(Options& o, std::ostream& out, std::ostream& err) : opt(o), out(out), err(err) {}

  Options& opt;
  std::ostream& out;
  std::ostream& err;
  std::set<std::string> inputs;

  ReportFormat format() const {
    if (opt.format == "csv") return ReportFormat::kCsv;
    if (opt.format == "json") return ReportFormat::kJson;
    throw ValidationError("format must be csv or json, got '" + opt.format + "'");
  }

  bool to_dir() const { return !opt.out.empty(); }

  std::filesystem::path path(const std::string& name) const {
    std::filesystem::create_directories(opt.out);
    return std::filesystem::path(opt.out) / name;
  }

  // To <out>/<name>.<ext>, or to stdout when no --out was given.
  void emit(const Report& report, const std::string& name, bool stdout_too = true) {
    if (to_dir()) {
      write_report(report, format(), path(name + (format() == ReportFormat::kCsv ? ".csv" : ".json")));
    } else if (stdout_too) {
      out << render_report(report, format());
    }
  }

  void emit_text(const std::string& name, const std::string& text) {
    if (!to_dir()) return;
    std::ofstream f(path(name), std::ios::binary);
    f << text;
    if (!f) throw Error("cannot write " + path(name).string());
  }

  void plot(const std::string& name, const PlotSpec& spec, const std::vector<PlotSeries>& series) {
    emit_text(name + ".svg", render_svg(spec, series));
  }

  Dataset load_one(const std::string& spec, const std::string& labels, std::size_t synth_n, std::uint64_t synth_seed) {
    const std::optional<std::size_t> limit =
        opt.limit > 0 ? std::optional<std::size_t>(opt.limit) : std::nullopt;
    Dataset d;
    if (spec == "mini") {
      d = mini_digits();
    } else if (spec == "synth") {
      d = synth_digits(synth_n, synth_seed);
    } else if (std::filesystem::path(spec).extension() == ".bin") {
      inputs.insert(spec);
      return load_cifar10(spec, limit);
    } else {
      if (labels.empty()) throw ValidationError("IDX image file '" + spec + "' needs --labels");
      inputs.insert(spec);
      inputs.insert(labels);
      return load_idx(spec, labels, limit);
    }
    if (limit && *limit < d.size()) d.examples.resize(*limit);
    return d;
  }

  Dataset train_set() { return load_one(opt.dataset, opt.labels, opt.train_size, derive_seed(opt.seed, 1)); }

  Dataset test_set() {
    if (!opt.test_dataset.empty()) {
      return load_one(opt.test_dataset, opt.test_labels, opt.test_size, derive_seed(opt.seed, 2));
    }
    if (opt.dataset == "synth") return synth_digits(opt.test_size, derive_seed(opt.seed, 2));
    return train_set();
  }

  TrainConfig train_config() const {
    TrainConfig c;
    c.learning_rate = opt.learning_rate;
    c.batch_size = opt.batch_size;
    c.max_epochs = opt.epochs;
    c.seed = derive_seed(opt.seed, 4);
    return c;
  }

  TrainResult fit(const Dataset& data) {
    const std::size_t hidden[] = {opt.hidden};
    const MlpModel init = mlp_init(mlp_layers(data.dim(), hidden, data.num_classes), derive_seed(opt.seed, 3));
    return train(init, data, train_config());
  }

  MlpModel base_model(const Dataset& data) {
    if (!opt.model.empty()) {
      inputs.insert(opt.model);
      MlpModel m = load_model(opt.model);
      if (m.input_dim() != data.dim()) throw DimensionError("model input does not match the dataset dimension");
      return m;
    }
    return fit(data).model;
  }

  AttackConfig attack_config(const std::string& name) const {
    AttackConfig c;
    c.kind = parse_attack_kind(name);
    c.epsilon = opt.epsilon;
    c.steps = opt.steps;
    c.max_iter = opt.max_iter;
    c.c = opt.cw_c;
    c.step_size = opt.step_size;
    c.overshoot = opt.overshoot;
    c.snr = opt.snr;
    if (opt.cw_optimizer == "adam") {
      c.cw_optimizer = CwOptimizer::kAdam;
    } else if (opt.cw_optimizer == "gd" || opt.cw_optimizer == "gradient-descent") {
      c.cw_optimizer = CwOptimizer::kGradientDescent;
    } else {
      throw ValidationError("cw optimizer must be adam or gd");
    }
    c.validate();
    return c;
  }

  // "all" expands to the three gradient attacks; "none" to nothing.
  std::vector<std::string> attack_names() const {
    if (opt.attack == "none") return {};
    if (opt.attack == "all") return {"fgsm", "deepfool", "cw"};
    std::vector<std::string> out;
    std::stringstream ss(opt.attack);
    for (std::string s; std::getline(ss, s, ',');) {
      if (!s.empty()) out.push_back(to_string(parse_attack_kind(s)));
    }
    return out;
  }

  Dataset adversarial(const MlpModel& model, const Dataset& data, const std::string& name) const {
    const AttackConfig c = attack_config(name);
    if (c.kind == AttackKind::kGaussianSnr) return gaussian_snr(data, c.snr, derive_seed(opt.seed, 5));
    return attack_dataset(model, data, c).data;
  }
};

// Subcommands ---------------------------------------------------------------

int cmd_train(Context& ctx) {
  const Dataset data = ctx.train_set();
  const Dataset test = ctx.test_set();
  const TrainResult res = ctx.fit(data);
  Report r;
  r.experiment = "training-curve";
  r.notes = {"test_accuracy: " + format_real(accuracy(res.model, test))};
  r.columns = {"epoch", "train_accuracy"};
  PlotSeries s{"train accuracy", {}, false};
  for (std::size_t e = 0; e < res.accuracy_curve.size(); ++e) {
    r.add_row({static_cast<std::int64_t>(e + 1), res.accuracy_curve[e]});
    s.points.emplace_back(static_cast<double>(e + 1), res.accuracy_curve[e]);
  }
  ctx.emit(r, "train");
  ctx.plot("train", {"Training accuracy", "epoch", "accuracy"}, {s});
  std::string dest = ctx.opt.save_model;
  if (dest.empty() && ctx.to_dir()) dest = ctx.path("model.rlab").string();
  if (!dest.empty()) save_model(res.model, dest);
  return kOk;
}

int cmd_attack(Context& ctx) {
  const Dataset data = ctx.train_set();
  const MlpModel model = ctx.base_model(data);
  const AttackConfig config = ctx.attack_config(ctx.opt.attack);
  Report r;
  r.experiment = "attack-" + to_string(config.kind);
  if (config.kind == AttackKind::kGaussianSnr) {
    const Dataset noisy = gaussian_snr(data, config.snr, derive_seed(ctx.opt.seed, 5));
    r.notes = {"snr: " + format_real(config.snr), "accuracy: " + format_real(accuracy(model, noisy))};
    r.columns = {"index", "label", "prediction", "l2"};
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      double l2 = 0.0;
      for (std::size_t k = 0; k < data.dim(); ++k) {
        const double d = noisy.examples[i].input[k] - data.examples[i].input[k];
        l2 += d * d;
      }
      r.add_row({static_cast<std::int64_t>(i), static_cast<std::int64_t>(noisy.examples[i].label),
                 static_cast<std::int64_t>(predict(model, noisy.examples[i].input)), std::sqrt(l2)});
    }
    ctx.emit(r, "attack");
    if (ctx.to_dir()) save_dataset(noisy, ctx.path("adversarial-images.idx"), ctx.path("adversarial-labels.idx"));
    return kOk;
  }
  const AttackedDataset adv = attack_dataset(model, data, config);
  r.notes = {"success_rate: " + format_real(adv.success_rate())};
  r.columns = {"index", "label", "success", "l2", "linf", "queries"};
  for (std::size_t i = 0; i < adv.data.size(); ++i) {
    r.add_row({static_cast<std::int64_t>(i), static_cast<std::int64_t>(adv.data.examples[i].label),
               static_cast<std::int64_t>(adv.success[i] ? 1 : 0), adv.l2[i], adv.linf[i],
               static_cast<std::int64_t>(adv.queries[i])});
  }
  ctx.emit(r, "attack");
  if (ctx.to_dir()) {
    save_dataset(adv.data, ctx.path("adversarial-images.idx"), ctx.path("adversarial-labels.idx"));
    ctx.emit_text("attack.json", attack_sidecar_json(config, ctx.opt.seed, adv));
  }
  return kOk;
}

struct ImageMetrics {
  double h_mle = 0, h_jvhw = 0, original = 0, compressed = 0;
};

ImageMetrics image_metrics(const Dataset& data, int quality) {
  const ImageShape shape = infer_shape(data.dim());
  ImageMetrics m;
  for (const Example& ex : data.examples) {
    m.h_mle += image_entropy(ex.input, Estimator::kMle);
    m.h_jvhw += image_entropy(ex.input, Estimator::kJvhw);
    const ComplexityReport c = complexity_report(ex.input, shape, quality);
    m.original += static_cast<double>(c.original_size);
    m.compressed += static_cast<double>(c.compressed_size);
  }
  const double n = static_cast<double>(data.size());
  m.h_mle /= n;
  m.h_jvhw /= n;
  m.original /= n;
  m.compressed /= n;
  return m;
}

int cmd_measure_entropy(Context& ctx) {
  Report r;
  if (!ctx.opt.text_pairs.empty()) {
    ctx.inputs.insert(ctx.opt.text_pairs);
    const auto pairs = load_text_pairs(ctx.opt.text_pairs);
    r.experiment = "text-complexity";
    r.columns = {"variant", "pairs", "mean_bits", "h_byte_wise", "h_bit_wise", "compressed_size"};
    for (auto side : {TextSide::kBenign, TextSide::kAdversarial}) {
      const TextMetrics m = text_metrics(pairs, side);
      r.add_row({side == TextSide::kBenign ? "benign" : "adversarial", static_cast<std::int64_t>(pairs.size()),
                 m.mean_bits_per_char, m.h_byte_wise, m.h_bit_wise, m.compressed_size});
    }
    ctx.emit(r, "measure-entropy");
    return kOk;
  }
  const Dataset data = ctx.train_set();
  const MlpModel model = ctx.base_model(data);
  r.experiment = "input-complexity";
  r.notes = {"entropy: 256-bin pixel histogram per image, averaged",
             "sizes: raw DEFLATE of 8-bit pixels, and after quality-" + std::to_string(ctx.opt.quality) +
                 " block quantization"};
  r.columns = {"variant", "examples", "h_mle", "h_jvhw", "original_size", "compressed_size"};
  auto add = [&](const std::string& name, const Dataset& d) {
    const ImageMetrics m = image_metrics(d, ctx.opt.quality);
    r.add_row({name, static_cast<std::int64_t>(d.size()), m.h_mle, m.h_jvhw, m.original, m.compressed});
  };
  add("benign", data);
  for (const std::string& name : ctx.attack_names()) add(name, ctx.adversarial(model, data, name));
  ctx.emit(r, "measure-entropy");
  return kOk;
}

int cmd_complexity(Context& ctx) {
  const Dataset data = ctx.train_set();
  const ImageShape shape = infer_shape(data.dim());
  Report r;
  r.experiment = "compressed-size";
  r.notes = {"quality: " + std::to_string(ctx.opt.quality)};
  r.columns = {"variant", "examples", "original_size", "compressed_size", "ratio"};
  auto add = [&](const std::string& name, const Dataset& d) {
    double orig = 0, comp = 0, ratio = 0;
    for (const Example& ex : d.examples) {
      const ComplexityReport c = complexity_report(ex.input, shape, ctx.opt.quality);
      orig += static_cast<double>(c.original_size);
      comp += static_cast<double>(c.compressed_size);
      ratio += c.ratio;
    }
    const double n = static_cast<double>(d.size());
    r.add_row({name, static_cast<std::int64_t>(d.size()), orig / n, comp / n, ratio / n});
  };
  add("benign", data);
  const auto attacks = ctx.attack_names();
  if (!attacks.empty()) {
    const MlpModel model = ctx.base_model(data);
    for (const std::string& name : attacks) add(name, ctx.adversarial(model, data, name));
  }
  ctx.emit(r, "complexity");
  return kOk;
}

int cmd_quality_sweep(Context& ctx) {
  if (ctx.opt.dump_qtable) {
    QuantizationConfig qc;
    qc.quality = ctx.opt.quality;
    const QuantTable t = scaled_table(qc);
    for (std::size_t row = 0; row < 8; ++row) {
      for (std::size_t col = 0; col < 8; ++col) ctx.out << (col ? " " : "") << std::setw(3) << t[row * 8 + col];
      ctx.out << "\n";
    }
    return kOk;
  }
  const Dataset data = ctx.train_set();
  const Dataset test = ctx.test_set();
  const MlpModel model = ctx.base_model(data);
  const ImageShape shape = infer_shape(data.dim());
  std::vector<int> qualities;
  for (double q : parse_real_list(ctx.opt.quality_list)) {
    if (q != std::floor(q)) throw ValidationError("qualities must be integers");
    qualities.push_back(static_cast<int>(q));
  }
  const auto attacks = ctx.attack_names();
  std::vector<Dataset> advs;
  for (const auto& name : attacks) advs.push_back(ctx.adversarial(model, test, name));

  Report r;
  r.experiment = "quality-sweep";
  r.columns = {"quality", "benign_accuracy"};
  for (const auto& name : attacks) r.columns.push_back(name + "_accuracy");
  std::vector<PlotSeries> series{{"benign", {}, false}};
  for (const auto& name : attacks) series.push_back({name, {}, false});
  for (int q : qualities) {
    QuantizationConfig qc;
    qc.quality = q;
    std::vector<Cell> row{static_cast<std::int64_t>(q)};
    const double acc = accuracy(model, quantize_dataset(test, shape, qc));
    row.emplace_back(acc);
    series[0].points.emplace_back(q, acc);
    for (std::size_t k = 0; k < advs.size(); ++k) {
      const double a = accuracy(model, quantize_dataset(advs[k], shape, qc));
      row.emplace_back(a);
      series[k + 1].points.emplace_back(q, a);
    }
    r.add_row(std::move(row));
  }
  ctx.emit(r, "quality-sweep");
  ctx.plot("quality-sweep", {"Accuracy vs quantization quality", "quality", "accuracy"}, series);
  return kOk;
}

int cmd_capacity(Context& ctx) {
  const Dataset data = ctx.train_set();
  const MlpModel model = ctx.base_model(data);
  const std::vector<double> eps = parse_real_list(ctx.opt.epsilon_list);
  CapacityConfig cc;
  const std::size_t hidden[] = {ctx.opt.hidden};
  cc.arch = mlp_layers(data.dim(), hidden, data.num_classes);
  cc.trials_per_size = ctx.opt.trials > 0 ? ctx.opt.trials : 5;
  cc.seed = derive_seed(ctx.opt.seed, 6);

  std::vector<std::pair<std::string, Dataset>> variants{{"benign", data}};
  for (const auto& name : ctx.attack_names()) variants.emplace_back(name, ctx.adversarial(model, data, name));
  const auto start = std::chrono::steady_clock::now();

  Report r, curve;
  r.experiment = "memorization-capacity";
  r.notes = {"trials_per_size: " + std::to_string(cc.trials_per_size)};
  r.columns = {"epsilon", "variant", "min_params", "total_params", "exceeds_architecture", "budget_exhausted"};
  curve.experiment = "memorization-capacity-curve";
  curve.columns = {"epsilon", "variant", "param_count", "best_train_accuracy", "trials_run", "passed"};
  std::vector<PlotSeries> series;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    if (ctx.opt.budget_seconds > 0) {
      const std::chrono::duration<double> used = std::chrono::steady_clock::now() - start;
      const double left = ctx.opt.budget_seconds - used.count();
      cc.budget_seconds = std::max(1e-3, left / static_cast<double>(variants.size() - v));
    }
    const auto results = memorization_capacity(variants[v].second, eps, cc);
    PlotSeries s{variants[v].first, {}, false};
    for (const CapacityResult& res : results) {
      r.add_row({res.epsilon, variants[v].first, static_cast<std::int64_t>(res.min_params),
                 static_cast<std::int64_t>(res.total_params), static_cast<std::int64_t>(res.exceeds_architecture),
                 static_cast<std::int64_t>(res.budget_exhausted)});
      s.points.emplace_back(res.epsilon, static_cast<double>(res.min_params));
      for (const CapacityProbe& p : res.curve) {
        curve.add_row({res.epsilon, variants[v].first, static_cast<std::int64_t>(p.param_count), p.best_train_accuracy,
                       static_cast<std::int64_t>(p.trials_run), static_cast<std::int64_t>(p.passed)});
      }
    }
    series.push_back(std::move(s));
  }
  ctx.emit(r, "capacity");
  ctx.emit(curve, "capacity-curve", false);
  ctx.plot("capacity", {"Memorization capacity", "epsilon", "min trainable parameters"}, series);
  return kOk;
}

ThresholdNetwork network_from_weights(const std::string& text) {
  const std::vector<double> w = parse_real_list(text);
  if (w.size() != 9) {
    throw ValidationError("--base-weights takes 9 numbers: h1 (x1, x2, threshold), h2 (x1, x2, threshold), "
                          "output (h1, h2, threshold)");
  }
  return ThresholdNetwork({ThresholdUnit{{w[0], w[1], 0}, w[2]}, ThresholdUnit{{w[3], w[4], 0}, w[5]}},
                          ThresholdUnit{{w[6], w[7]}, w[8]});
}

int cmd_nxor(Context& ctx) {
  const bool canonical = ctx.opt.base_weights.empty();
  const ThresholdNetwork base = canonical ? canonical_base() : network_from_weights(ctx.opt.base_weights);
  Report r;
  if (ctx.opt.redundant_bits == 1) {
    const auto rows = enumerate_suppression(base);
    r.experiment = "nxor-suppression";
    r.columns = {"w1", "w2", "adv_count", "allowing_edges", "potential"};
    std::ostringstream text;
    text << "  w1  w2  adv_count  allowing_edges  potential\n";
    bool zero_only_at_origin = true;
    for (const SuppressionRow& row : rows) {
      r.add_row({static_cast<std::int64_t>(row.w1), static_cast<std::int64_t>(row.w2),
                 static_cast<std::int64_t>(row.adv_count), static_cast<std::int64_t>(row.allowing_edges),
                 static_cast<std::int64_t>(row.potential)});
      text << std::setw(4) << row.w1 << std::setw(4) << row.w2 << std::setw(11) << row.adv_count << std::setw(16)
           << row.allowing_edges << std::setw(11) << row.potential << "\n";
      if ((row.adv_count == 0) != (row.w1 == 0 && row.w2 == 0)) zero_only_at_origin = false;
    }
    if (ctx.to_dir() || ctx.opt.format != "csv") {
      ctx.emit(r, "nxor");
      if (ctx.to_dir()) ctx.out << text.str();
    } else {
      ctx.out << text.str();
    }
    if (canonical && !zero_only_at_origin) {
      ctx.err << "check failed: adv_count = 0 must hold exactly at (w1, w2) = (0, 0)\n";
      return kCheckFailed;
    }
    return kOk;
  }
  const GeneralizedSummary s = generalized_enumerate(ctx.opt.redundant_bits, base);
  r.experiment = "nxor-generalized";
  r.notes = {"redundant_bits: " + std::to_string(s.redundant_bits), "input_space: " + std::to_string(s.input_space)};
  r.columns = {"potential", "adv_count", "configurations"};
  for (const auto& [key, n] : s.distribution) {
    r.add_row({static_cast<std::int64_t>(key.first), static_cast<std::int64_t>(key.second),
               static_cast<std::int64_t>(n)});
  }
  ctx.emit(r, "nxor");
  return kOk;
}

int cmd_verify_theorem(Context& ctx) {
  Report r;
  r.experiment = "necessity-verification";
  r.columns = {"check", "passed", "total"};
  bool ok = true;
  if (!ctx.opt.system.empty()) {
    ctx.inputs.insert(ctx.opt.system);
    const SystemDocument doc = load_system_json(ctx.opt.system);
    if (!doc.feature || !doc.decision || !doc.adv) {
      throw ValidationError("system file needs feature, decision and adversarial blocks");
    }
    const NecessityReport rep = verify_necessity(doc.system, *doc.feature, *doc.decision, *doc.adv);
    r.notes = {"h_feature: " + format_real(rep.h_feature), "h_reduced: " + format_real(rep.h_reduced),
               "entropy_gap: " + format_real(rep.entropy_gap), "redundancy: " + format_real(rep.redundancy),
               "mi_drop: " + format_real(rep.mi_drop), "anchor: " + doc.system.x_support[rep.anchor]};
    r.add_row({"entropy_decreased", static_cast<std::int64_t>(rep.entropy_decreased), std::int64_t{1}});
    r.add_row({"redundancy_positive", static_cast<std::int64_t>(rep.redundancy_positive), std::int64_t{1}});
    r.add_row({"differs_from_minimal", static_cast<std::int64_t>(rep.differs_from_minimal), std::int64_t{1}});
    ok = rep.all_verdicts();
  } else {
    const std::size_t trials = ctx.opt.trials > 0 ? ctx.opt.trials : 1000;
    const TheoremTrialSummary s = run_theorem_trials(trials, ctx.opt.seed);
    r.notes = {"max_mi_drop: " + format_real(s.max_mi_drop)};
    auto add = [&](const char* name, std::size_t pass, std::size_t total) {
      r.add_row({name, static_cast<std::int64_t>(pass), static_cast<std::int64_t>(total)});
      ok = ok && pass == total;
    };
    add("entropy_decreased", s.entropy_decreased, s.trials);
    add("redundancy_positive", s.redundancy_positive, s.trials);
    add("differs_from_minimal", s.differs_from_minimal, s.trials);
    add("exhaustive_minimality", s.exhaustive_passed, s.exhaustive_checks);
    ctx.out << s.entropy_decreased << "/" << s.trials << " entropy-gap verdicts positive\n";
  }
  ctx.emit(r, "verify-theorem");
  return ok ? kOk : kCheckFailed;
}

int cmd_snr_sweep(Context& ctx) {
  const Dataset data = ctx.train_set();
  const Dataset test = ctx.test_set();
  const MlpModel model = ctx.base_model(data);
  const auto points = snr_sweep(model, test, parse_real_list(ctx.opt.snr_list), derive_seed(ctx.opt.seed, 7),
                                ctx.opt.noise_seeds);
  Report r;
  r.experiment = "snr-sweep";
  r.notes = {"accuracy: median over " + std::to_string(ctx.opt.noise_seeds) + " noise seeds"};
  r.columns = {"snr", "accuracy"};
  PlotSeries s{"accuracy", {}, false};
  for (const SnrPoint& p : points) {
    r.add_row({p.snr, p.accuracy});
    if (std::isfinite(p.snr)) s.points.emplace_back(p.snr, p.accuracy);
  }
  ctx.emit(r, "snr-sweep");
  ctx.plot("snr-sweep", {"Accuracy under additive Gaussian noise", "SNR", "accuracy", true}, {s});
  return kOk;
}

int cmd_robustness_sweep(Context& ctx) {
  const Dataset data = ctx.train_set();
  const Dataset test = ctx.test_set();
  const MlpModel model = ctx.base_model(data);
  const std::vector<double> ratios = parse_real_list(ctx.opt.ratios);
  Report r;
  r.experiment = "feature-entropy-vs-robustness";
  r.columns = {"attack", "ratio", "adv_accuracy", "h_mle", "h_jvhw", "successful"};
  std::vector<PlotSeries> series;
  for (const std::string& name : ctx.attack_names()) {
    RobustnessConfig rc;
    rc.attack = ctx.attack_config(name);
    rc.finetune.max_epochs = ctx.opt.finetune_epochs;
    rc.finetune.learning_rate = ctx.opt.learning_rate;
    rc.finetune.batch_size = ctx.opt.batch_size;
    rc.seed = derive_seed(ctx.opt.seed, 8);
    const auto points = robustness_sweep(model, data, ratios, test, rc);
    std::vector<double> acc, h;
    PlotSeries s{name + " entropy", {}, true};
    for (const RobustnessPoint& p : points) {
      r.add_row({name, p.adv_ratio, p.adv_test_accuracy, p.feature_entropy, p.feature_entropy_jvhw,
                 static_cast<std::int64_t>(p.successful)});
      acc.push_back(p.adv_test_accuracy);
      h.push_back(p.feature_entropy);
      s.points.emplace_back(p.adv_test_accuracy, p.feature_entropy);
    }
    r.notes.push_back(name + " spearman(adv_accuracy, h_mle): " + format_real(spearman(acc, h)));
    series.push_back(std::move(s));
  }
  ctx.emit(r, "robustness-sweep");
  ctx.plot("robustness-sweep", {"Feature entropy vs adversarial accuracy", "adversarial accuracy", "bits"}, series);
  return kOk;
}

// CLI wiring ----------------------------------------------------------------

void add_seed(CLI::App* s, Options& o) { s->add_option("--seed", o.seed, "Master seed"); }

void add_output(CLI::App* s, Options& o) {
  s->add_option("--out", o.out, "Output directory for reports, plots and the run manifest");
  s->add_option("--format", o.format, "Report format: csv or json");
  s->add_option("--config", o.config, "JSON file of option values; explicit flags take precedence");
}

void add_data(CLI::App* s, Options& o) {
  s->add_option("--dataset", o.dataset, "mini, synth, an IDX image file, or a CIFAR-10 .bin file");
  s->add_option("--labels", o.labels, "IDX label file for --dataset");
  s->add_option("--test-dataset", o.test_dataset, "Held-out set, same forms as --dataset");
  s->add_option("--test-labels", o.test_labels, "IDX label file for --test-dataset");
  s->add_option("--limit", o.limit, "Use at most this many examples from files");
  s->add_option("--train-size", o.train_size, "Examples drawn for --dataset synth");
  s->add_option("--test-size", o.test_size, "Held-out examples drawn for --dataset synth");
}

void add_model(CLI::App* s, Options& o) {
  s->add_option("--model", o.model, "RLAB model file; trained from --dataset when absent");
  s->add_option("--hidden", o.hidden, "Hidden units of the MLP");
  s->add_option("--epochs", o.epochs, "Training epochs");
  s->add_option("--learning-rate", o.learning_rate, "SGD learning rate");
  s->add_option("--batch-size", o.batch_size, "Mini-batch size");
}

void add_attack(CLI::App* s, Options& o, const std::string& default_attack) {
  o.attack = default_attack;
  s->add_option("--attack", o.attack, "fgsm, deepfool, cw, gaussian, a comma list, all, or none");
  s->add_option("--epsilon", o.epsilon, "FGSM step size (L-infinity)");
  s->add_option("--steps", o.steps, "CW optimization steps");
  s->add_option("--max-iter", o.max_iter, "DeepFool iteration cap");
  s->add_option("--cw-c", o.cw_c, "CW margin weight");
  s->add_option("--step-size", o.step_size, "CW optimizer step size");
  s->add_option("--overshoot", o.overshoot, "DeepFool overshoot");
  s->add_option("--cw-optimizer", o.cw_optimizer, "adam or gd");
  s->add_option("--snr", o.snr, "SNR for the gaussian attack");
}

void apply_config(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config file: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) throw ValidationError("config file must hold a JSON object");
  for (const auto& [key, value] : doc.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = sub->get_option_no_throw("--" + name);
    if (!opt) throw ValidationError("config key '" + key + "' is not an option of " + sub->get_name());
    if (opt->count() > 0) continue;  // explicit flag wins
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_array()) {
      for (const auto& v : value) text += (text.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
    } else {
      text = value.dump();
    }
    opt->add_result(text);
    opt->run_callback();
  }
}

std::map<std::string, std::string> resolved_config(const CLI::App* sub) {
  std::map<std::string, std::string> out;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name == "--help") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    out[name.rfind("--", 0) == 0 ? name.substr(2) : name] = value;
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Redundancy and adversarial-example measurement toolkit", "rlab"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::map<CLI::App*, std::function<int(Context&)>> handlers;
  auto sub = [&](const char* name, const char* about, std::function<int(Context&)> h) {
    CLI::App* s = app.add_subcommand(name, about);
    add_seed(s, o);
    add_output(s, o);
    handlers[s] = std::move(h);
    return s;
  };

  {
    auto* s = sub("train", "Train the MLP and report the accuracy curve", cmd_train);
    add_data(s, o);
    add_model(s, o);
    s->add_option("--save-model", o.save_model, "Write the trained model here (default <out>/model.rlab)");
  }
  {
    auto* s = sub("attack", "Craft adversarial examples and write them with a JSON sidecar", cmd_attack);
    add_data(s, o);
    add_model(s, o);
    add_attack(s, o, "fgsm");
  }
  {
    auto* s = sub("measure-entropy", "Entropy and compressed size of benign vs adversarial inputs",
                  cmd_measure_entropy);
    add_data(s, o);
    add_model(s, o);
    add_attack(s, o, "fgsm");
    s->add_option("--quality", o.quality, "Quantization quality for the compressed size");
    s->add_option("--text-pairs", o.text_pairs, "TSV of benign/adversarial word pairs");
  }
  {
    auto* s = sub("complexity", "Compressed sizes before and after block quantization", cmd_complexity);
    add_data(s, o);
    add_model(s, o);
    add_attack(s, o, "none");
    s->add_option("--quality", o.quality, "Quantization quality 1..100");
  }
  {
    auto* s = sub("quality-sweep", "Accuracy as a function of quantization quality", cmd_quality_sweep);
    add_data(s, o);
    add_model(s, o);
    add_attack(s, o, "none");
    s->add_option("--quality-list", o.quality_list, "Comma-separated qualities");
    s->add_option("--quality", o.quality, "Quality used by --dump-qtable");
    s->add_flag("--dump-qtable", o.dump_qtable, "Print the scaled 8x8 table for --quality and exit");
  }
  {
    auto* s = sub("capacity", "Minimal trainable parameters to fit benign vs adversarial data", cmd_capacity);
    add_data(s, o);
    add_model(s, o);
    add_attack(s, o, "fgsm");
    s->add_option("--epsilon-list", o.epsilon_list, "Comma-separated error tolerances");
    s->add_option("--trials", o.trials, "Random masks per probed size (default 5)");
    s->add_option("--budget-seconds", o.budget_seconds, "Wall-clock cap; partial results are flagged");
  }
  {
    auto* s = sub("nxor", "Exhaustive suppression table of the equality network", cmd_nxor);
    s->add_option("--redundant-bits", o.redundant_bits, "Number of redundant inputs");
    s->add_option("--base-weights", o.base_weights,
                  "Alternate base: h1 x1,x2,thr, h2 x1,x2,thr, output h1,h2,thr (9 numbers)");
  }
  {
    auto* s = sub("verify-theorem", "Check the redundancy construction on random discrete systems",
                  cmd_verify_theorem);
    s->add_option("--trials", o.trials, "Number of random systems (default 1000)");
    s->add_option("--system", o.system, "Verify one system from a JSON file instead");
  }
  {
    auto* s = sub("snr-sweep", "Accuracy under Gaussian noise of decreasing SNR", cmd_snr_sweep);
    add_data(s, o);
    add_model(s, o);
    s->add_option("--snr-list", o.snr_list, "Comma-separated SNR values, inf for clean");
    s->add_option("--noise-seeds", o.noise_seeds, "Noise draws per SNR (median reported)");
  }
  {
    auto* s = sub("robustness-sweep", "Feature entropy of models fine-tuned with adversarial data",
                  cmd_robustness_sweep);
    add_data(s, o);
    add_model(s, o);
    add_attack(s, o, "fgsm");
    s->add_option("--ratios", o.ratios, "Comma-separated adversarial fractions, ascending");
    s->add_option("--finetune-epochs", o.finetune_epochs, "Fine-tuning epochs per ratio");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    CLI::App* active = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << "error: " << e.what() << "\n\n" << active->help();
    return kInvalid;
  }

  CLI::App* active = app.get_subcommands().front();
  Context ctx(o, out, err);
  RunManifest manifest;
  manifest.subcommand = active->get_name();
  manifest.started_at = utc_now();
  try {
    if (!o.config.empty()) {
      ctx.inputs.insert(o.config);
      apply_config(active, o.config);
    }
    ctx.format();  // reject a bad --format before doing any work
    const int code = handlers.at(active)(ctx);
    manifest.config = resolved_config(active);
    manifest.seed = o.seed;
    manifest.finished_at = utc_now();
    for (const auto& p : ctx.inputs) manifest.input_digests[p] = sha256_hex(p);
    if (ctx.to_dir()) ctx.emit_text("manifest.json", manifest.to_json());
    return code;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  }
}

}  // namespace rlab::cli
