#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rlab/capacity.hpp"
#include "rlab/dataio.hpp"
#include "rlab/error.hpp"

using namespace rlab;

namespace {

CapacityConfig blob_config(std::uint64_t seed = 1) {
  const std::size_t hidden[] = {4};
  CapacityConfig c;
  c.arch = mlp_layers(2, hidden, 2);
  c.train = make_train_config(0.2, 30);
  c.trials_per_size = 3;
  c.seed = seed;
  return c;
}

std::vector<double> params_of(const MlpModel& m) { return {m.params().begin(), m.params().end()}; }

}  // namespace

TEST_SUITE("capacity") {
  TEST_CASE("random masks have the requested popcount and are deterministic") {
    for (std::size_t count : {0u, 1u, 17u, 50u}) {
      const WeightMask m = WeightMask::random(50, count, 9);
      CHECK(m.trainable_count == count);
      CHECK(std::count(m.mask.begin(), m.mask.end(), 1) == static_cast<long>(count));
      CHECK(WeightMask::random(50, count, 9).mask == m.mask);
    }
    CHECK(WeightMask::random(50, 25, 1).mask != WeightMask::random(50, 25, 2).mask);
    CHECK_THROWS_AS(WeightMask::random(5, 6, 0), ValidationError);
  }

  TEST_CASE("random masks cover positions uniformly") {
    std::vector<int> hits(20, 0);
    for (std::uint64_t s = 0; s < 2000; ++s) {
      const WeightMask m = WeightMask::random(20, 5, s);
      for (std::size_t i = 0; i < 20; ++i) hits[i] += m.mask[i];
    }
    // expected 500 per position
    for (int h : hits) CHECK(std::abs(h - 500) < 80);
  }

  TEST_CASE("masked models zero the pinned weights") {
    const std::size_t hidden[] = {4};
    const MlpModel base = mlp_init(mlp_layers(2, hidden, 2), 0);
    const WeightMask mask = WeightMask::random(base.param_count(), 5, 3);
    const MlpModel m = apply_mask(base, mask, 11);
    for (std::size_t i = 0; i < m.param_count(); ++i) {
      CHECK(m.is_trainable(i) == (mask.mask[i] != 0));
      if (!mask.mask[i]) CHECK(m.params()[i] == 0.0);
    }
    CHECK(params_of(apply_mask(base, mask, 11)) == params_of(m));
    WeightMask wrong = mask;
    wrong.mask.pop_back();
    CHECK_THROWS_AS(apply_mask(base, wrong, 11), DimensionError);
    wrong = mask;
    wrong.trainable_count += 1;
    CHECK_THROWS_AS(apply_mask(base, wrong, 11), ValidationError);
  }

  TEST_CASE("all-ones mask trains like the unmasked model") {
    const Dataset d = synth_blobs(60, 4);
    const std::size_t hidden[] = {4};
    const MlpModel plain = mlp_init(mlp_layers(2, hidden, 2), 8);
    const MlpModel masked = apply_mask(plain, WeightMask::all(plain.param_count(), true), 8);
    CHECK(params_of(masked) == params_of(plain));
    TrainConfig tc = make_train_config(0.1, 5);
    CHECK(params_of(train(masked, d, tc).model) == params_of(train(plain, d, tc).model));
  }

  TEST_CASE("all-zeros mask gives the majority frequency") {
    Dataset d = synth_blobs(40, 2);
    for (std::size_t i = 0; i < 10; ++i) d.examples[i].label = 1;
    std::size_t ones = 0;
    for (const auto& e : d.examples) ones += e.label;
    const double majority = std::max<double>(ones, d.size() - ones) / static_cast<double>(d.size());
    CHECK(capacity_trial(d, blob_config(), 0, 0) == doctest::Approx(majority));
    const std::size_t hidden[] = {4};
    const MlpModel base = mlp_init(mlp_layers(2, hidden, 2), 0);
    const MlpModel zero = apply_mask(base, WeightMask::all(base.param_count(), false), 1);
    const double acc = accuracy(train(zero, d, make_train_config(0.2, 5)).model, d);
    CHECK(acc <= majority);
  }

  TEST_CASE("loose tolerance needs no parameters") {
    Dataset d = synth_blobs(40, 6);
    const CapacityResult r = memorization_capacity(d, 0.5, blob_config());
    CHECK(r.min_params == 0);
    CHECK_FALSE(r.exceeds_architecture);
  }

  TEST_CASE("two separable points need at most three weights") {
    Dataset d;
    d.num_classes = 2;
    d.examples = {{{0.2, 0.3}, 0}, {{0.8, 0.7}, 1}};
    CapacityConfig c;
    c.arch = mlp_layers(2, {}, 2);
    c.train = make_train_config(0.5, 50);
    c.trials_per_size = 5;
    const CapacityResult r = memorization_capacity(d, 0.01, c);
    CHECK(r.min_params <= 3);
    CHECK(r.total_params == 6);
  }

  TEST_CASE("binary search is consistent with its probes") {
    const Dataset d = synth_blobs(40, 12);
    const std::vector<double> eps{0.01, 0.05, 0.2};
    const auto results = memorization_capacity(d, eps, blob_config(5));
    REQUIRE(results.size() == 3);
    for (const CapacityResult& r : results) {
      CHECK(r.total_params == 22);
      bool found = false;
      for (const CapacityProbe& p : r.curve) {
        if (p.param_count < r.min_params) CHECK_FALSE(p.passed);
        if (p.param_count == r.min_params) {
          CHECK((p.passed || r.exceeds_architecture));
          found = true;
        }
        if (p.passed) CHECK(p.best_train_accuracy >= 1.0 - r.epsilon - 1e-12);
      }
      CHECK(found);
    }
    // a looser tolerance never needs more weights
    CHECK(results[1].min_params <= results[0].min_params);
    CHECK(results[2].min_params <= results[1].min_params);
  }

  TEST_CASE("capacity trials are reproducible") {
    const Dataset d = synth_blobs(30, 3);
    CHECK(capacity_trial(d, blob_config(), 7, 1) == capacity_trial(d, blob_config(), 7, 1));
  }

  TEST_CASE("capacity config and data validation") {
    CapacityConfig c = blob_config();
    c.trials_per_size = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    const Dataset wide = synth_digits(5, 1);
    CHECK_THROWS_AS(memorization_capacity(wide, 0.1, blob_config()), DimensionError);
  }

  TEST_CASE("spearman with ties") {
    // ranks (1, 2.5, 2.5, 4) vs (1, 3, 2, 4): 4.5 / sqrt(4.5 · 5)
    const std::vector<double> a{1, 2, 2, 3}, b{1, 3, 2, 4};
    CHECK(spearman(a, b) == doctest::Approx(4.5 / std::sqrt(22.5)));
    const std::vector<double> up{1, 2, 3, 4, 5}, down{9, 7, 6, 2, 1}, flat{1, 1, 1, 1, 1};
    CHECK(spearman(up, down) == doctest::Approx(-1.0));
    CHECK(spearman(up, up) == doctest::Approx(1.0));
    CHECK(std::isnan(spearman(up, flat)));
    CHECK_THROWS_AS(spearman(up, a), DimensionError);
  }

  TEST_CASE("feature quantization range") {
    const std::vector<std::vector<double>> f{{0, 1, 2, 3}, {100, -100, 0.5, 1.5}};
    const auto s = quantize_features(f, 16, 3.0);
    for (const auto& row : s)
      for (Symbol v : row) CHECK(v < 16);
    const std::vector<std::vector<double>> flat{{2, 2}, {2, 2}};
    for (const auto& row : quantize_features(flat, 16, 3.0))
      for (Symbol v : row) CHECK(v == 8);
  }

  TEST_CASE("robustness sweep on blobs") {
    const Dataset train = synth_blobs(80, 1), test = synth_blobs(40, 2);
    const std::size_t hidden[] = {8};
    TrainConfig tc = make_train_config(0.2, 20);
    const MlpModel base = ::rlab::train(mlp_init(mlp_layers(2, hidden, 2), 3), train, tc).model;
    RobustnessConfig rc;
    rc.attack.epsilon = 0.3;
    rc.finetune = make_train_config(0.1, 3);
    const std::vector<double> ratios{0.0, 0.5, 1.0};
    const auto pts = robustness_sweep(base, train, ratios, test, rc);
    REQUIRE(pts.size() == 3);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(pts[i].adv_ratio == ratios[i]);
      CHECK((pts[i].adv_test_accuracy >= 0.0 && pts[i].adv_test_accuracy <= 1.0));
      CHECK(pts[i].feature_entropy >= 0.0);
      CHECK(pts[i].successful <= test.size());
    }
    rc.levels = 1;
    CHECK_THROWS_AS(rc.validate(), ValidationError);
  }
}
