#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "rlab/attacks.hpp"
#include "rlab/dataio.hpp"
#include "rlab/error.hpp"

using namespace rlab;

namespace {

// z0 = x0 + 2·x2, z1 = x1 − x2
MlpModel linear3() { return MlpModel({{3, 2, Activation::kIdentity}}, {1, 0, 2, 0, 1, -1, 0, 0}, 0); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

Dataset digit_test() { return synth_digits(60, 901); }

}  // namespace

TEST_SUITE("attacks") {
  TEST_CASE("fgsm with zero epsilon is the identity") {
    AttackConfig cfg;
    cfg.epsilon = 0.0;
    const std::vector<double> x{0.5, 0.2, 0.3};
    const AttackResult r = fgsm(linear3(), x, 0, cfg);
    CHECK(r.adv_input == x);
    CHECK(r.perturbation_l2 == 0.0);
    CHECK(r.perturbation_linf == 0.0);
  }

  TEST_CASE("fgsm follows the closed-form gradient sign") {
    // loss gradient = (p0 − 1)·(1, −2) + p1·(0, 0): sign (−, +)
    const MlpModel m({{2, 2, Activation::kIdentity}}, {1, -2, 0, 0, 0, 0}, 0);
    AttackConfig cfg;
    cfg.epsilon = 0.1;
    const AttackResult r = fgsm(m, std::vector<double>{0.5, 0.5}, 0, cfg);
    CHECK(r.adv_input[0] == doctest::Approx(0.4));
    CHECK(r.adv_input[1] == doctest::Approx(0.6));
    CHECK(r.perturbation_linf == doctest::Approx(0.1));
  }

  TEST_CASE("fgsm perturbation is bounded by epsilon and clipped") {
    const MlpModel& m = testutil::digit_model();
    AttackConfig cfg;
    cfg.epsilon = 0.2;
    for (const Example& e : digit_test().examples) {
      const AttackResult r = fgsm(m, e.input, e.label, cfg);
      CHECK(r.perturbation_linf <= 0.2 + 1e-12);
      for (double v : r.adv_input) CHECK((v >= 0.0 && v <= 1.0));
    }
  }

  TEST_CASE("fgsm fools most digits at 0.25") {
    AttackConfig cfg;
    cfg.epsilon = 0.25;
    const AttackedDataset a = attack_dataset(testutil::digit_model(), digit_test(), cfg);
    CHECK(a.success_rate() > 0.5);
  }

  TEST_CASE("deepfool on a linear model matches the analytic boundary step") {
    // w = ∇(z1 − z0) = (−1, 1, −3), gap = 1.2 at x = (0.5, 0.2, 0.3)
    AttackConfig cfg;
    cfg.kind = AttackKind::kDeepFool;
    cfg.clip = false;
    const std::vector<double> x{0.5, 0.2, 0.3};
    const AttackResult r = deepfool(linear3(), x, 0, cfg);
    const double step = 1.02 * 1.2 / 11.0;
    CHECK(r.adv_input[0] == doctest::Approx(0.5 - step));
    CHECK(r.adv_input[1] == doctest::Approx(0.2 + step));
    CHECK(r.adv_input[2] == doctest::Approx(0.3 - 3 * step));
    CHECK(r.perturbation_l2 == doctest::Approx(1.02 * 1.2 / std::sqrt(11.0)));
    CHECK(r.success);
  }

  TEST_CASE("already misclassified inputs are returned untouched") {
    const std::vector<double> x{0.5, 0.2, 0.3};  // predicted 0
    for (AttackKind kind : {AttackKind::kFgsm, AttackKind::kDeepFool, AttackKind::kCwL2}) {
      AttackConfig cfg;
      cfg.kind = kind;
      cfg.epsilon = kind == AttackKind::kFgsm ? 0.0 : 0.25;
      const AttackResult r = run_attack(linear3(), x, 1, cfg);
      CHECK(r.success);
      CHECK(r.perturbation_l2 == 0.0);
    }
  }

  TEST_CASE("cw with no steps returns the input") {
    AttackConfig cfg;
    cfg.kind = AttackKind::kCwL2;
    cfg.steps = 0;
    const std::vector<double> x{0.5, 0.2, 0.3};
    const AttackResult r = cw_l2(linear3(), x, 0, cfg);
    CHECK(r.adv_input == x);
    CHECK_FALSE(r.success);
  }

  TEST_CASE("cw stays in the box") {
    AttackConfig cfg;
    cfg.kind = AttackKind::kCwL2;
    cfg.steps = 50;
    const Dataset d = digit_test();
    for (std::size_t i = 0; i < 5; ++i) {
      const AttackResult r = cw_l2(testutil::digit_model(), d.examples[i].input, d.examples[i].label, cfg);
      for (double v : r.adv_input) CHECK((v >= 0.0 && v <= 1.0));
    }
  }

  TEST_CASE("deepfool and cw find smaller perturbations than fgsm") {
    const MlpModel& m = testutil::digit_model();
    const Dataset d = digit_test();
    AttackConfig fg;
    AttackConfig df;
    df.kind = AttackKind::kDeepFool;
    AttackConfig cw;
    cw.kind = AttackKind::kCwL2;
    cw.steps = 100;
    std::vector<double> l2_fgsm, l2_df, l2_cw_pair, l2_fgsm_pair;
    for (std::size_t i = 0; i < 30; ++i) {
      const Example& e = d.examples[i];
      if (predict(m, e.input) != e.label) continue;
      const AttackResult a = fgsm(m, e.input, e.label, fg);
      const AttackResult b = deepfool(m, e.input, e.label, df);
      if (a.success) l2_fgsm.push_back(a.perturbation_l2);
      if (b.success) l2_df.push_back(b.perturbation_l2);
      const AttackResult c = cw_l2(m, e.input, e.label, cw);
      if (a.success && c.success) {
        l2_fgsm_pair.push_back(a.perturbation_l2);
        l2_cw_pair.push_back(c.perturbation_l2);
      }
    }
    REQUIRE_FALSE(l2_fgsm.empty());
    REQUIRE_FALSE(l2_df.empty());
    REQUIRE_FALSE(l2_cw_pair.empty());
    CHECK(median(l2_df) < median(l2_fgsm));
    double mean_cw = 0, mean_fg = 0;
    for (std::size_t i = 0; i < l2_cw_pair.size(); ++i) {
      mean_cw += l2_cw_pair[i];
      mean_fg += l2_fgsm_pair[i];
    }
    CHECK(mean_cw < mean_fg);
  }

  TEST_CASE("gaussian snr matches the requested noise power") {
    Dataset d;
    d.num_classes = 1;
    for (int n = 0; n < 20; ++n) d.examples.push_back({std::vector<double>(10000, 0.5), 0});
    const double snr = 100.0;  // σ = 0.05, far from the clip bounds
    const Dataset noisy = gaussian_snr(d, snr, 4);
    double noise = 0, signal = 0;
    for (std::size_t n = 0; n < d.size(); ++n) {
      for (std::size_t i = 0; i < d.dim(); ++i) {
        const double e = noisy.examples[n].input[i] - d.examples[n].input[i];
        noise += e * e;
        signal += d.examples[n].input[i] * d.examples[n].input[i];
      }
    }
    CHECK(std::abs(noise / signal * snr - 1.0) < 0.05);
  }

  TEST_CASE("infinite snr is a no-op and non-positive snr is rejected") {
    const Dataset d = digit_test();
    const Dataset same = gaussian_snr(d, kSnrInfinity, 1);
    for (std::size_t n = 0; n < d.size(); ++n) CHECK(same.examples[n].input == d.examples[n].input);
    CHECK_THROWS_AS(gaussian_snr(d, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(gaussian_snr(d, -1.0, 1), ValidationError);
  }

  TEST_CASE("config validation and names") {
    AttackConfig cfg;
    cfg.epsilon = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    CHECK(parse_attack_kind("deepfool") == AttackKind::kDeepFool);
    CHECK(to_string(AttackKind::kCwL2) == to_string(parse_attack_kind(to_string(AttackKind::kCwL2))));
    CHECK_THROWS_AS(parse_attack_kind("pgd"), ValidationError);
    AttackConfig noise;
    noise.kind = AttackKind::kGaussianSnr;
    CHECK_THROWS_AS(run_attack(linear3(), std::vector<double>{0, 0, 0}, 0, noise), ValidationError);
  }

  TEST_CASE("attack sidecar records every example") {
    AttackConfig cfg;
    const Dataset d = synth_digits(5, 3);
    const AttackedDataset a = attack_dataset(testutil::digit_model(), d, cfg);
    const std::string json = attack_sidecar_json(cfg, 9, a);
    CHECK(json.find("\"epsilon\"") != std::string::npos);
    CHECK(a.l2.size() == 5);
    CHECK(a.success.size() == 5);
  }
}
