#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rlab/error.hpp"

namespace rlab {

// Joint distribution p(x, y) over finite supports, row-major by x.
struct DiscreteSystem {
  std::vector<std::string> x_support;
  std::vector<std::string> y_support;
  std::vector<std::vector<double>> joint;

  std::size_t x_count() const noexcept { return x_support.size(); }
  std::size_t y_count() const noexcept { return y_support.size(); }
  double px(std::size_t x) const;
  double py(std::size_t y) const;

  // Non-negative, sums to 1 within 1e-12, every marginal strictly positive.
  void validate() const;
};

// Partition of x_support: cell[x] is the feature symbol of x. Cell ids are
// 0..cells−1, each non-empty.
struct FeatureMap {
  std::vector<std::size_t> cell;

  std::size_t cells() const;
  void validate(std::size_t x_count) const;

  static FeatureMap identity(std::size_t x_count);
  // Relabels cells in order of first appearance, so equal partitions compare equal.
  FeatureMap canonical() const;
  // True iff both induce the same partition.
  bool same_partition(const FeatureMap& other) const;
};

// Label (index into y_support) for each feature symbol.
struct DecisionMap {
  std::vector<std::size_t> label;

  void validate(const FeatureMap& feature, std::size_t y_count) const;
  std::size_t operator()(std::size_t cell) const { return label.at(cell); }
};

struct AdversarialSpec {
  std::vector<std::size_t> adv_set;
  // Defaults to the correctly classified x outside adv_set with the largest p(x).
  std::optional<std::size_t> anchor;
  std::vector<std::size_t> ground_truth;  // label per x

  void validate(const DiscreteSystem& system, const FeatureMap& feature, const DecisionMap& decision) const;
};

// Entropy of T(X) in bits.
double feature_entropy(const DiscreteSystem& system, const FeatureMap& feature);

// I(X;Y) and I(T(X);Y) in bits.
double mutual_information(const DiscreteSystem& system);
double mutual_information(const DiscreteSystem& system, const FeatureMap& feature);

inline constexpr double kSufficiencyTolerance = 1e-9;

bool is_sufficient(const DiscreteSystem& system, const FeatureMap& feature, double tol = kSufficiencyTolerance);

struct PartitionOptions {
  double tolerance = 1e-9;  // on p(y|x), ignored when exact
  // Compare conditionals as exact rationals of the stored doubles.
  bool exact = false;
};

// Groups x symbols with equal p(y|x).
FeatureMap minimal_sufficient_partition(const DiscreteSystem& system, const PartitionOptions& options = {});

class InsufficientFeatureError : public ValidationError {
 public:
  InsufficientFeatureError(const std::string& what, double gap) : ValidationError(what), gap_(gap) {}
  // I(X;Y) − I(T(X);Y) in bits.
  double gap() const noexcept { return gap_; }

 private:
  double gap_;
};

// H(T(X)) − H(T_min(X)); throws InsufficientFeatureError when T loses information.
double redundancy(const DiscreteSystem& system, const FeatureMap& feature);

// The anchor-merge map: T′(x) = T(x) off adv_set, T′(a) = T(anchor) on it.
// Empty cells are dropped and the result relabelled canonically.
FeatureMap construct_reduced_feature(const DiscreteSystem& system, const FeatureMap& feature,
                                     const DecisionMap& decision, const AdversarialSpec& adv);

std::size_t resolve_anchor(const DiscreteSystem& system, const FeatureMap& feature, const DecisionMap& decision,
                           const AdversarialSpec& adv);

struct NecessityReport {
  double h_feature = 0.0;
  double h_reduced = 0.0;
  double entropy_gap = 0.0;  // h_feature − h_reduced
  double redundancy = 0.0;
  double mi_drop = 0.0;      // I(X;Y) − I(T′(X);Y), reported rather than asserted
  std::size_t anchor = 0;
  bool entropy_decreased = false;
  bool redundancy_positive = false;
  bool differs_from_minimal = false;
  // Every adversarial cell moved wholesale into the anchor cell.
  bool whole_cells = false;

  bool all_verdicts() const noexcept { return entropy_decreased && redundancy_positive && differs_from_minimal; }
};

NecessityReport verify_necessity(const DiscreteSystem& system, const FeatureMap& feature, const DecisionMap& decision,
                                 const AdversarialSpec& adv);

// Calls visit(cell) for every set partition of n elements as a restricted
// growth string, in lexicographic order; visit returns false to stop.
void for_each_partition(std::size_t n, const std::function<bool(const std::vector<std::size_t>&)>& visit);

std::uint64_t bell_number(std::size_t n);

inline constexpr std::size_t kExhaustiveLimit = 10;

struct ExhaustiveCheck {
  std::uint64_t partitions = 0;
  std::uint64_t sufficient = 0;
  double min_sufficient_entropy = 0.0;
  double minimal_entropy = 0.0;
  bool minimal_is_optimal = false;
};

// Enumerates every partition of x_support (|X| ≤ kExhaustiveLimit).
ExhaustiveCheck exhaustive_minimality(const DiscreteSystem& system);

// A generated trial: a redundant sufficient feature with a planted adversarial set.
struct PlantedSystem {
  DiscreteSystem system;
  FeatureMap feature;
  DecisionMap decision;
  AdversarialSpec adv;
};

// |X| uniform in [4, 10], |Y| in {2, 3}. p(x) ~ Dirichlet(1), each minimal
// cell gets its own p(y|cell) ~ Dirichlet(1), redrawn until every pair of
// cell conditionals differs by at least 0.05 somewhere. The feature splits one minimal
// cell in two; one half is decided wrongly and becomes the adversarial set,
// anchored at the heaviest member of the other half.
PlantedSystem random_planted_system(std::uint64_t seed);

struct TheoremTrialSummary {
  std::size_t trials = 0;
  std::size_t entropy_decreased = 0;
  std::size_t redundancy_positive = 0;
  std::size_t differs_from_minimal = 0;
  std::size_t exhaustive_checks = 0;
  std::size_t exhaustive_passed = 0;
  double max_mi_drop = 0.0;
};

// Seeds derive from (seed, trial index).
TheoremTrialSummary run_theorem_trials(std::size_t trials, std::uint64_t seed, bool exhaustive = true);

// JSON document: {"x_support": [..], "y_support": [..], "joint": [[..]..],
// optional "feature": [cell label per x], "decision": {cell label: y},
// "adversarial": {"adv_set": [x..], "anchor": x, "ground_truth": [y per x]}}.
struct SystemDocument {
  DiscreteSystem system;
  std::optional<FeatureMap> feature;
  std::optional<DecisionMap> decision;
  std::optional<AdversarialSpec> adv;
};

SystemDocument parse_system_json(std::string_view text);
SystemDocument load_system_json(const std::filesystem::path& path);

}  // namespace rlab
