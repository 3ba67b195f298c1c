#include "rlab/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <numeric>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "bytes.hpp"
#include "rlab/rng.hpp"

namespace rlab {

namespace {

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

std::size_t argmax_row(const std::vector<double>& row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

// p(cell, y) for a feature map.
std::vector<std::vector<double>> pushforward(const DiscreteSystem& system, const FeatureMap& feature) {
  std::vector<std::vector<double>> out(feature.cells(), std::vector<double>(system.y_count(), 0.0));
  for (std::size_t x = 0; x < system.x_count(); ++x) {
    for (std::size_t y = 0; y < system.y_count(); ++y) out[feature.cell[x]][y] += system.joint[x][y];
  }
  return out;
}

double joint_mi(const std::vector<std::vector<double>>& joint, const std::vector<double>& py) {
  double mi = 0.0;
  for (const auto& row : joint) {
    const double pr = std::accumulate(row.begin(), row.end(), 0.0);
    for (std::size_t y = 0; y < row.size(); ++y) {
      if (row[y] > 0.0) mi += row[y] * std::log2(row[y] / (pr * py[y]));
    }
  }
  return mi;
}

std::vector<double> y_marginal(const DiscreteSystem& system) {
  std::vector<double> py(system.y_count());
  for (std::size_t y = 0; y < py.size(); ++y) py[y] = system.py(y);
  return py;
}

}  // namespace

double DiscreteSystem::px(std::size_t x) const {
  const auto& row = joint.at(x);
  return std::accumulate(row.begin(), row.end(), 0.0);
}

double DiscreteSystem::py(std::size_t y) const {
  double s = 0.0;
  for (const auto& row : joint) s += row.at(y);
  return s;
}

void DiscreteSystem::validate() const {
  if (x_support.empty() || y_support.empty()) throw ValidationError("supports must be non-empty");
  if (joint.size() != x_support.size()) throw DimensionError("joint needs one row per x symbol");
  double total = 0.0;
  for (const auto& row : joint) {
    if (row.size() != y_support.size()) throw DimensionError("joint needs one column per y symbol");
    for (double p : row) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("joint probabilities must be finite and >= 0");
      total += p;
    }
  }
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("joint sums to " + std::to_string(total) + ", not 1");
  for (std::size_t x = 0; x < x_count(); ++x) {
    if (!(px(x) > 0.0)) throw ValidationError("p(x) is zero for '" + x_support[x] + "'");
  }
  for (std::size_t y = 0; y < y_count(); ++y) {
    if (!(py(y) > 0.0)) throw ValidationError("p(y) is zero for '" + y_support[y] + "'");
  }
}

std::size_t FeatureMap::cells() const {
  return cell.empty() ? 0 : *std::max_element(cell.begin(), cell.end()) + 1;
}

void FeatureMap::validate(std::size_t x_count) const {
  if (cell.size() != x_count) throw DimensionError("feature map must assign every x symbol");
  std::vector<bool> used(cells(), false);
  for (std::size_t c : cell) used[c] = true;
  if (std::find(used.begin(), used.end(), false) != used.end()) throw ValidationError("feature map has an empty cell");
}

FeatureMap FeatureMap::identity(std::size_t x_count) {
  FeatureMap f;
  f.cell.resize(x_count);
  std::iota(f.cell.begin(), f.cell.end(), std::size_t{0});
  return f;
}

FeatureMap FeatureMap::canonical() const {
  std::map<std::size_t, std::size_t> relabel;
  FeatureMap out;
  for (std::size_t c : cell) {
    auto [it, fresh] = relabel.emplace(c, relabel.size());
    out.cell.push_back(it->second);
  }
  return out;
}

bool FeatureMap::same_partition(const FeatureMap& other) const { return canonical().cell == other.canonical().cell; }

void DecisionMap::validate(const FeatureMap& feature, std::size_t y_count) const {
  if (label.size() < feature.cells()) throw DimensionError("decision map must cover every feature symbol");
  for (std::size_t l : label) {
    if (l >= y_count) throw ValidationError("decision label outside y support");
  }
}

void AdversarialSpec::validate(const DiscreteSystem& system, const FeatureMap& feature,
                               const DecisionMap& decision) const {
  if (ground_truth.size() != system.x_count()) throw DimensionError("ground truth must label every x symbol");
  for (std::size_t l : ground_truth) {
    if (l >= system.y_count()) throw ValidationError("ground-truth label outside y support");
  }
  for (std::size_t a : adv_set) {
    if (a >= system.x_count()) throw ValidationError("adversarial point outside x support");
    if (decision(feature.cell[a]) == ground_truth[a]) {
      throw ValidationError("'" + system.x_support[a] + "' is classified correctly, so it is not adversarial");
    }
  }
  if (anchor) {
    if (*anchor >= system.x_count()) throw ValidationError("anchor outside x support");
    if (std::find(adv_set.begin(), adv_set.end(), *anchor) != adv_set.end()) {
      throw ValidationError("anchor must not be adversarial");
    }
    if (decision(feature.cell[*anchor]) != ground_truth[*anchor]) {
      throw ValidationError("anchor must be classified correctly");
    }
  }
}

double feature_entropy(const DiscreteSystem& system, const FeatureMap& feature) {
  feature.validate(system.x_count());
  std::vector<double> mass(feature.cells(), 0.0);
  for (std::size_t x = 0; x < system.x_count(); ++x) mass[feature.cell[x]] += system.px(x);
  double h = 0.0;
  for (double p : mass) h -= plogp(p);
  return h;
}

double mutual_information(const DiscreteSystem& system) {
  system.validate();
  return joint_mi(system.joint, y_marginal(system));
}

double mutual_information(const DiscreteSystem& system, const FeatureMap& feature) {
  system.validate();
  feature.validate(system.x_count());
  return joint_mi(pushforward(system, feature), y_marginal(system));
}

bool is_sufficient(const DiscreteSystem& system, const FeatureMap& feature, double tol) {
  return mutual_information(system) - mutual_information(system, feature) <= tol;
}

FeatureMap minimal_sufficient_partition(const DiscreteSystem& system, const PartitionOptions& options) {
  system.validate();
  const std::size_t nx = system.x_count(), ny = system.y_count();
  FeatureMap out;
  out.cell.resize(nx);
  std::vector<std::size_t> reps;

  if (options.exact) {
    using boost::multiprecision::cpp_rational;
    std::vector<std::vector<cpp_rational>> q(nx, std::vector<cpp_rational>(ny));
    std::vector<cpp_rational> mass(nx);
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t y = 0; y < ny; ++y) {
        q[x][y] = cpp_rational(system.joint[x][y]);
        mass[x] += q[x][y];
      }
    }
    // p(y|x) = p(y|r) ⇔ p(x,y)·p(r) = p(r,y)·p(x)
    auto same = [&](std::size_t a, std::size_t b) {
      for (std::size_t y = 0; y < ny; ++y) {
        if (q[a][y] * mass[b] != q[b][y] * mass[a]) return false;
      }
      return true;
    };
    for (std::size_t x = 0; x < nx; ++x) {
      auto it = std::find_if(reps.begin(), reps.end(), [&](std::size_t r) { return same(x, r); });
      out.cell[x] = static_cast<std::size_t>(it - reps.begin());
      if (it == reps.end()) reps.push_back(x);
    }
    return out;
  }

  std::vector<std::vector<double>> cond(nx, std::vector<double>(ny));
  for (std::size_t x = 0; x < nx; ++x) {
    const double p = system.px(x);
    for (std::size_t y = 0; y < ny; ++y) cond[x][y] = system.joint[x][y] / p;
  }
  auto same = [&](std::size_t a, std::size_t b) {
    for (std::size_t y = 0; y < ny; ++y) {
      if (std::abs(cond[a][y] - cond[b][y]) > options.tolerance) return false;
    }
    return true;
  };
  for (std::size_t x = 0; x < nx; ++x) {
    auto it = std::find_if(reps.begin(), reps.end(), [&](std::size_t r) { return same(x, r); });
    out.cell[x] = static_cast<std::size_t>(it - reps.begin());
    if (it == reps.end()) reps.push_back(x);
  }
  return out;
}

double redundancy(const DiscreteSystem& system, const FeatureMap& feature) {
  const double gap = mutual_information(system) - mutual_information(system, feature);
  if (gap > kSufficiencyTolerance) {
    throw InsufficientFeatureError("feature is not sufficient: loses " + std::to_string(gap) + " bits", gap);
  }
  const double r = feature_entropy(system, feature) - feature_entropy(system, minimal_sufficient_partition(system));
  return std::max(0.0, r);
}

std::size_t resolve_anchor(const DiscreteSystem& system, const FeatureMap& feature, const DecisionMap& decision,
                           const AdversarialSpec& adv) {
  if (adv.anchor) return *adv.anchor;
  std::optional<std::size_t> best;
  for (std::size_t x = 0; x < system.x_count(); ++x) {
    if (std::find(adv.adv_set.begin(), adv.adv_set.end(), x) != adv.adv_set.end()) continue;
    if (decision(feature.cell[x]) != adv.ground_truth[x]) continue;
    if (!best || system.px(x) > system.px(*best)) best = x;
  }
  if (!best) throw ValidationError("no correctly classified benign point to anchor the construction");
  return *best;
}

FeatureMap construct_reduced_feature(const DiscreteSystem& system, const FeatureMap& feature,
                                     const DecisionMap& decision, const AdversarialSpec& adv) {
  system.validate();
  feature.validate(system.x_count());
  decision.validate(feature, system.y_count());
  adv.validate(system, feature, decision);
  if (adv.adv_set.empty()) throw ValidationError("empty adversarial set leaves the feature unchanged");
  const std::size_t anchor = resolve_anchor(system, feature, decision, adv);
  FeatureMap out = feature;
  for (std::size_t a : adv.adv_set) out.cell[a] = feature.cell[anchor];
  return out.canonical();
}

NecessityReport verify_necessity(const DiscreteSystem& system, const FeatureMap& feature, const DecisionMap& decision,
                                 const AdversarialSpec& adv) {
  NecessityReport r;
  r.redundancy = redundancy(system, feature);  // rejects insufficient features
  const FeatureMap reduced = construct_reduced_feature(system, feature, decision, adv);
  r.anchor = resolve_anchor(system, feature, decision, adv);
  r.h_feature = feature_entropy(system, feature);
  r.h_reduced = feature_entropy(system, reduced);
  r.entropy_gap = r.h_feature - r.h_reduced;
  r.mi_drop = std::max(0.0, mutual_information(system) - mutual_information(system, reduced));
  r.entropy_decreased = r.entropy_gap > 1e-12;
  r.redundancy_positive = r.redundancy > 1e-12;
  r.differs_from_minimal = !feature.same_partition(minimal_sufficient_partition(system));

  r.whole_cells = true;
  for (std::size_t x = 0; x < system.x_count(); ++x) {
    const bool in_adv = std::find(adv.adv_set.begin(), adv.adv_set.end(), x) != adv.adv_set.end();
    if (in_adv) continue;
    for (std::size_t a : adv.adv_set) {
      if (feature.cell[a] == feature.cell[x] && feature.cell[a] != feature.cell[r.anchor]) r.whole_cells = false;
    }
  }
  return r;
}

void for_each_partition(std::size_t n, const std::function<bool(const std::vector<std::size_t>&)>& visit) {
  if (n == 0) {
    visit({});
    return;
  }
  std::vector<std::size_t> a(n, 0), top(n, 0);  // top[i] = max(a[0..i-1])
  while (true) {
    if (!visit(a)) return;
    std::size_t i = n - 1;
    while (i > 0 && a[i] > top[i]) --i;
    if (i == 0) return;
    ++a[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      a[j] = 0;
      top[j] = std::max(top[j - 1], a[j - 1]);
    }
  }
}

std::uint64_t bell_number(std::size_t n) {
  // Bell triangle
  std::vector<std::uint64_t> row{1};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint64_t> next{row.back()};
    for (std::uint64_t v : row) next.push_back(next.back() + v);
    row = std::move(next);
  }
  return row.front();
}

ExhaustiveCheck exhaustive_minimality(const DiscreteSystem& system) {
  system.validate();
  const std::size_t nx = system.x_count(), ny = system.y_count();
  if (nx > kExhaustiveLimit) {
    throw ValidationError("exhaustive check is limited to " + std::to_string(kExhaustiveLimit) + " x symbols");
  }
  const FeatureMap minimal = minimal_sufficient_partition(system);
  const double h_min = feature_entropy(system, minimal);
  const double mi_full = mutual_information(system);
  const std::vector<double> py = y_marginal(system);
  std::vector<double> px(nx);
  for (std::size_t x = 0; x < nx; ++x) px[x] = system.px(x);

  ExhaustiveCheck out;
  out.minimal_entropy = h_min;
  out.min_sufficient_entropy = std::numeric_limits<double>::infinity();
  std::vector<double> cell_joint(nx * ny), cell_mass(nx);
  for_each_partition(nx, [&](const std::vector<std::size_t>& cells) {
    ++out.partitions;
    std::fill(cell_joint.begin(), cell_joint.end(), 0.0);
    std::fill(cell_mass.begin(), cell_mass.end(), 0.0);
    std::size_t used = 0;
    for (std::size_t x = 0; x < nx; ++x) {
      used = std::max(used, cells[x] + 1);
      cell_mass[cells[x]] += px[x];
      for (std::size_t y = 0; y < ny; ++y) cell_joint[cells[x] * ny + y] += system.joint[x][y];
    }
    double mi = 0.0, h = 0.0;
    for (std::size_t c = 0; c < used; ++c) {
      h -= plogp(cell_mass[c]);
      for (std::size_t y = 0; y < ny; ++y) {
        const double p = cell_joint[c * ny + y];
        if (p > 0.0) mi += p * std::log2(p / (cell_mass[c] * py[y]));
      }
    }
    if (mi_full - mi <= kSufficiencyTolerance) {
      ++out.sufficient;
      out.min_sufficient_entropy = std::min(out.min_sufficient_entropy, h);
    }
    return true;
  });
  out.minimal_is_optimal = h_min <= out.min_sufficient_entropy + 1e-12;
  return out;
}

namespace {

std::vector<double> dirichlet_ones(Rng& rng, std::size_t k) {
  std::vector<double> v(k);
  double s = 0.0;
  for (double& x : v) {
    x = rng.gamma(1.0);
    s += x;
  }
  for (double& x : v) x /= s;
  return v;
}

}  // namespace

PlantedSystem random_planted_system(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t nx = 4 + rng.below(7);
  const std::size_t ny = 2 + rng.below(2);
  const std::size_t m = 1 + rng.below(nx - 1);  // minimal cells; nx > m forces a splittable cell

  std::vector<std::size_t> order(nx);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::size_t> minimal(nx);
  for (std::size_t i = 0; i < nx; ++i) minimal[order[i]] = i < m ? i : rng.below(m);

  // Cell conditionals are kept at least kConditionalGap apart (max-norm): a
  // near-tie would let a coarser, MI-tolerance-"sufficient" partition beat
  // the minimal one in the brute-force check.
  constexpr double kConditionalGap = 0.05;
  std::vector<std::vector<double>> cond;
  while (cond.size() < m) {
    std::vector<double> c = dirichlet_ones(rng, ny);
    bool ok = true;
    for (const auto& other : cond) {
      double d = 0.0;
      for (std::size_t y = 0; y < ny; ++y) d = std::max(d, std::abs(c[y] - other[y]));
      if (d < kConditionalGap) ok = false;
    }
    if (ok) cond.push_back(std::move(c));
  }
  const std::vector<double> px = dirichlet_ones(rng, nx);

  PlantedSystem out;
  DiscreteSystem& sys = out.system;
  for (std::size_t x = 0; x < nx; ++x) sys.x_support.push_back("x" + std::to_string(x));
  for (std::size_t y = 0; y < ny; ++y) sys.y_support.push_back("y" + std::to_string(y));
  sys.joint.assign(nx, std::vector<double>(ny));
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t y = 0; y < ny; ++y) sys.joint[x][y] = px[x] * cond[minimal[x]][y];
  }

  std::vector<std::size_t> splittable;
  for (std::size_t c = 0; c < m; ++c) {
    if (std::count(minimal.begin(), minimal.end(), c) >= 2) splittable.push_back(c);
  }
  const std::size_t target = splittable[rng.below(splittable.size())];
  std::vector<std::size_t> members;
  for (std::size_t x = 0; x < nx; ++x) {
    if (minimal[x] == target) members.push_back(x);
  }
  rng.shuffle(std::span<std::size_t>(members));
  const std::size_t keep = 1 + rng.below(members.size() - 1);

  out.feature.cell = minimal;
  for (std::size_t i = keep; i < members.size(); ++i) {
    out.feature.cell[members[i]] = m;
    out.adv.adv_set.push_back(members[i]);
  }
  std::sort(out.adv.adv_set.begin(), out.adv.adv_set.end());

  out.decision.label.resize(m + 1);
  for (std::size_t c = 0; c < m; ++c) out.decision.label[c] = argmax_row(cond[c]);
  const std::size_t truth = out.decision.label[target];
  out.decision.label[m] = (truth + 1 + rng.below(ny - 1)) % ny;

  out.adv.ground_truth.resize(nx);
  for (std::size_t x = 0; x < nx; ++x) out.adv.ground_truth[x] = argmax_row(cond[minimal[x]]);
  std::size_t anchor = members[0];
  for (std::size_t i = 1; i < keep; ++i) {
    if (px[members[i]] > px[anchor]) anchor = members[i];
  }
  out.adv.anchor = anchor;
  return out;
}

TheoremTrialSummary run_theorem_trials(std::size_t trials, std::uint64_t seed, bool exhaustive) {
  TheoremTrialSummary s;
  for (std::size_t t = 0; t < trials; ++t) {
    const PlantedSystem p = random_planted_system(derive_seed(seed, t));
    const NecessityReport r = verify_necessity(p.system, p.feature, p.decision, p.adv);
    ++s.trials;
    s.entropy_decreased += r.entropy_decreased;
    s.redundancy_positive += r.redundancy_positive;
    s.differs_from_minimal += r.differs_from_minimal;
    s.max_mi_drop = std::max(s.max_mi_drop, r.mi_drop);
    if (exhaustive && p.system.x_count() <= kExhaustiveLimit) {
      ++s.exhaustive_checks;
      s.exhaustive_passed += exhaustive_minimality(p.system).minimal_is_optimal;
    }
  }
  return s;
}

namespace {

std::size_t index_of(const std::vector<std::string>& support, const std::string& name, const char* what) {
  auto it = std::find(support.begin(), support.end(), name);
  if (it == support.end()) throw ValidationError(std::string("unknown ") + what + " symbol '" + name + "'");
  return static_cast<std::size_t>(it - support.begin());
}

std::string symbol_text(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw ValidationError("symbols must be strings or integers");
}

}  // namespace

SystemDocument parse_system_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid system JSON: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) throw ValidationError("system JSON must be an object");
  SystemDocument out;
  try {
    for (const auto& s : doc.at("x_support")) out.system.x_support.push_back(symbol_text(s));
    for (const auto& s : doc.at("y_support")) out.system.y_support.push_back(symbol_text(s));
    out.system.joint = doc.at("joint").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("system JSON: ") + e.what());
  }
  out.system.validate();
  const auto& sys = out.system;

  std::map<std::string, std::size_t> cell_ids;
  if (doc.contains("feature")) {
    FeatureMap f;
    for (const auto& c : doc["feature"]) {
      auto [it, fresh] = cell_ids.emplace(symbol_text(c), cell_ids.size());
      f.cell.push_back(it->second);
    }
    f.validate(sys.x_count());
    out.feature = std::move(f);
  }
  if (doc.contains("decision")) {
    if (!out.feature) throw ValidationError("a decision map needs a feature map");
    DecisionMap d;
    d.label.assign(out.feature->cells(), sys.y_count());
    for (const auto& [cell, label] : doc["decision"].items()) {
      auto it = cell_ids.find(cell);
      if (it == cell_ids.end()) throw ValidationError("decision names unknown feature symbol '" + cell + "'");
      d.label[it->second] = index_of(sys.y_support, symbol_text(label), "y");
    }
    for (std::size_t l : d.label) {
      if (l == sys.y_count()) throw ValidationError("decision map must cover every feature symbol");
    }
    out.decision = std::move(d);
  }
  if (doc.contains("adversarial")) {
    if (!out.decision) throw ValidationError("an adversarial block needs feature and decision maps");
    const auto& a = doc["adversarial"];
    AdversarialSpec spec;
    for (const auto& x : a.at("adv_set")) spec.adv_set.push_back(index_of(sys.x_support, symbol_text(x), "x"));
    if (a.contains("anchor")) spec.anchor = index_of(sys.x_support, symbol_text(a["anchor"]), "x");
    if (a.contains("ground_truth")) {
      for (const auto& y : a["ground_truth"]) spec.ground_truth.push_back(index_of(sys.y_support, symbol_text(y), "y"));
    } else {
      for (const auto& row : sys.joint) spec.ground_truth.push_back(argmax_row(row));
    }
    spec.validate(sys, *out.feature, *out.decision);
    out.adv = std::move(spec);
  }
  return out;
}

SystemDocument load_system_json(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = detail::read_file(path);
  return parse_system_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace rlab
