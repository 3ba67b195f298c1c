#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "helpers.hpp"
#include "rlab/error.hpp"
#include "rlab/nn.hpp"

using namespace rlab;

namespace {

// W1 = [[1,-1],[2,0.5]], b1 = [0,-1], W2 = [[1,1],[-1,2]], b2 = [0.5,0]
MlpModel hand_net() {
  return MlpModel({{2, 2, Activation::kReLU}, {2, 2, Activation::kIdentity}},
                  {1, -1, 2, 0.5, 0, -1, 1, 1, -1, 2, 0.5, 0}, 0);
}

MlpModel random_net(std::uint64_t seed) {
  return mlp_init({{6, 5, Activation::kReLU}, {5, 4, Activation::kReLU}, {4, 3, Activation::kIdentity}}, seed);
}

Dataset blobs() {
  Dataset d;
  d.num_classes = 2;
  for (int i = 0; i < 40; ++i) {
    const double t = i / 40.0;
    d.examples.push_back({{0.1 + 0.2 * t, 0.2}, 0});
    d.examples.push_back({{0.7 + 0.2 * t, 0.8}, 1});
  }
  return d;
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("hand-computed forward pass") {
    const MlpModel m = hand_net();
    const std::vector<double> x{1, 2};
    const ForwardPass p = forward(m, x);
    // z1 = (1-2, 2+1-1) = (-1, 2) -> h = (0, 2); z2 = (0+2+0.5, 0+4+0)
    CHECK(p.features()[0] == 0.0);
    CHECK(p.features()[1] == 2.0);
    CHECK(p.logits()[0] == doctest::Approx(2.5));
    CHECK(p.logits()[1] == doctest::Approx(4.0));
    CHECK(predict(m, x) == 1);
    CHECK(loss(m, x, 0) == doctest::Approx(std::log(1 + std::exp(1.5))).epsilon(1e-12));
  }

  TEST_CASE("hand-computed gradients") {
    const MlpModel m = hand_net();
    const std::vector<double> x{1, 2};
    // d loss/d z2 = softmax - onehot(0) = (p0 - 1, p1)
    const double p1 = 1.0 / (1.0 + std::exp(-1.5));
    const double d0 = (1 - p1) - 1, d1 = p1;
    // only h2 is active: d/dx = (d0*W2[0][1] + d1*W2[1][1]) * W1[1]
    const double back = d0 * 1 + d1 * 2;
    const auto g = grad_input(m, x, 0);
    CHECK(g[0] == doctest::Approx(back * 2.0).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(back * 0.5).epsilon(1e-12));
  }

  TEST_CASE("input gradient matches central differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const MlpModel m = random_net(seed);
      const auto x = testutil::random_vector(6, seed + 100);
      const auto g = grad_input(m, x, seed % 3);
      for (std::size_t i = 0; i < x.size(); ++i) {
        auto xp = x, xm = x;
        xp[i] += 1e-6;
        xm[i] -= 1e-6;
        const double fd = (loss(m, xp, seed % 3) - loss(m, xm, seed % 3)) / 2e-6;
        CHECK(testutil::rel_err(g[i], fd) < 1e-3);
      }
    }
  }

  TEST_CASE("parameter gradient matches central differences") {
    const MlpModel m = random_net(9);
    const auto x = testutil::random_vector(6, 42);
    const auto g = grad_params(m, x, 2);
    REQUIRE(g.size() == m.param_count());
    std::vector<double> p(m.params().begin(), m.params().end());
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto pp = p, pm = p;
      pp[i] += 1e-6;
      pm[i] -= 1e-6;
      const double fd = (loss(m.with_params(pp), x, 2) - loss(m.with_params(pm), x, 2)) / 2e-6;
      CHECK(testutil::rel_err(g[i], fd) < 1e-3);
    }
  }

  TEST_CASE("logit gradient is linear in the weights") {
    const MlpModel m = random_net(4);
    const auto x = testutil::random_vector(6, 4);
    const ForwardPass pass = forward(m, x);
    const std::vector<double> a{1, 0, 0}, b{0, 0, 1}, ab{2, 0, -3};
    const auto ga = logit_gradient(m, pass, a), gb = logit_gradient(m, pass, b), gab = logit_gradient(m, pass, ab);
    for (std::size_t i = 0; i < ga.size(); ++i) CHECK(gab[i] == doctest::Approx(2 * ga[i] - 3 * gb[i]));
  }

  TEST_CASE("softmax normalizes and resists overflow") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto z = testutil::random_vector(10, s, -500, 500);
      const auto p = softmax(z);
      CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-9);
      for (double v : p) CHECK(v >= 0.0);
    }
    const std::vector<double> big{1000, 1000};
    CHECK(softmax(big)[0] == doctest::Approx(0.5));
    CHECK(std::isfinite(cross_entropy(std::vector<double>{-800, 800}, 0)));
  }

  TEST_CASE("argmax breaks ties towards the lowest index") {
    CHECK(argmax(std::vector<double>{0, 0, 0}) == 0);
    CHECK(argmax(std::vector<double>{1, 3, 3}) == 1);
  }

  TEST_CASE("glorot init range and zero biases") {
    const MlpModel m = mlp_init({{20, 10, Activation::kReLU}, {10, 3, Activation::kIdentity}}, 7);
    const double a0 = std::sqrt(6.0 / 30.0);
    for (std::size_t i = 0; i < 200; ++i) CHECK(std::abs(m.params()[i]) <= a0);
    for (std::size_t i = 200; i < 210; ++i) CHECK(m.params()[i] == 0.0);
    CHECK(m.param_count() == 20 * 10 + 10 + 10 * 3 + 3);
  }

  TEST_CASE("construction rejects inconsistent models") {
    CHECK_THROWS_AS(MlpModel({{2, 3, Activation::kReLU}, {4, 2, Activation::kIdentity}}, std::vector<double>(23), 0),
                    DimensionError);
    CHECK_THROWS_AS(MlpModel({{2, 2, Activation::kIdentity}}, std::vector<double>(5), 0), DimensionError);
    CHECK_THROWS_AS(forward(hand_net(), std::vector<double>{1, 2, 3}), DimensionError);
  }

  TEST_CASE("training fits separable blobs deterministically") {
    const Dataset d = blobs();
    const MlpModel init = mlp_init({{2, 8, Activation::kReLU}, {8, 2, Activation::kIdentity}}, 3);
    TrainConfig tc;
    tc.max_epochs = 40;
    tc.learning_rate = 0.2;
    tc.seed = 1;
    const TrainResult a = train(init, d, tc), b = train(init, d, tc);
    CHECK(a.accuracy_curve.size() == 40);
    CHECK(a.accuracy_curve.back() == 1.0);
    CHECK(std::vector<double>(a.model.params().begin(), a.model.params().end()) ==
          std::vector<double>(b.model.params().begin(), b.model.params().end()));
  }

  TEST_CASE("zero learning rate and zero epochs leave the model unchanged") {
    const Dataset d = blobs();
    const MlpModel init = mlp_init({{2, 4, Activation::kReLU}, {4, 2, Activation::kIdentity}}, 3);
    TrainConfig tc;
    tc.learning_rate = 0.0;
    tc.max_epochs = 3;
    const auto p0 = std::vector<double>(init.params().begin(), init.params().end());
    const TrainResult frozen = train(init, d, tc);
    CHECK(std::vector<double>(frozen.model.params().begin(), frozen.model.params().end()) == p0);
    tc.learning_rate = 0.1;
    tc.max_epochs = 0;
    const TrainResult r = train(init, d, tc);
    CHECK(r.accuracy_curve.empty());
    CHECK(std::vector<double>(r.model.params().begin(), r.model.params().end()) == p0);
  }

  TEST_CASE("early stop and epochs_to_accuracy") {
    const Dataset d = blobs();
    const MlpModel init = mlp_init({{2, 8, Activation::kReLU}, {8, 2, Activation::kIdentity}}, 3);
    TrainConfig tc;
    tc.learning_rate = 0.2;
    tc.max_epochs = 50;
    tc.stop_at_accuracy = 1.0;
    const TrainResult r = train(init, d, tc);
    CHECK(r.accuracy_curve.back() == 1.0);
    CHECK(r.accuracy_curve.size() < 50);
    const std::vector<double> curve{0.2, 0.9, 0.96, 0.94};
    CHECK(epochs_to_accuracy(curve, 0.95) == 3);
    CHECK_FALSE(epochs_to_accuracy(curve, 0.99).has_value());
  }

  TEST_CASE("train config validation") {
    TrainConfig tc;
    tc.batch_size = 0;
    CHECK_THROWS_AS(tc.validate(), ValidationError);
    tc.batch_size = 4;
    tc.learning_rate = -1;
    CHECK_THROWS_AS(tc.validate(), ValidationError);
  }

  TEST_CASE("diverging training raises a numeric error") {
    const Dataset d = blobs();
    const MlpModel init = mlp_init({{2, 8, Activation::kReLU}, {8, 2, Activation::kIdentity}}, 3);
    TrainConfig tc;
    tc.learning_rate = 1e300;
    CHECK_THROWS_AS(train(init, d, tc), NumericError);
  }

  TEST_CASE("dataset validation") {
    Dataset d = blobs();
    d.examples[3].input[0] = 1.5;
    CHECK_THROWS_AS(d.validate(), ValidationError);
    d = blobs();
    d.examples[0].label = 2;
    CHECK_THROWS_AS(d.validate(), ValidationError);
  }

  TEST_CASE("model serialization round trip and framing") {
    const MlpModel m = random_net(12);
    const auto bytes = serialize_model(m);
    CHECK(bytes.size() == 4 + 4 + 4 + 3 * 12 + 8 + 8 + 8 * m.param_count());
    CHECK(bytes[0] == 'R');
    CHECK(bytes[3] == 'B');
    const MlpModel back = deserialize_model(bytes);
    CHECK(back.layers() == m.layers());
    CHECK(back.seed() == m.seed());
    CHECK(std::vector<double>(back.params().begin(), back.params().end()) ==
          std::vector<double>(m.params().begin(), m.params().end()));
    CHECK(serialize_model(back) == bytes);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad), ParseError);
    auto cut = bytes;
    cut.resize(cut.size() - 3);
    CHECK_THROWS_AS(deserialize_model(cut), ParseError);
    auto extra = bytes;
    extra.push_back(0);
    CHECK_THROWS_AS(deserialize_model(extra), ParseError);
  }

  TEST_CASE("parameter count of the digit architecture") {
    const std::vector<LayerSpec> spec{{784, 64, Activation::kReLU}, {64, 10, Activation::kSoftmax}};
    CHECK(param_count_for(spec) == 50890);
    CHECK(mlp_init(spec, 1).param_count() == 50890);
    const std::vector<LayerSpec> bad{{3, 4, Activation::kReLU}, {5, 2, Activation::kIdentity}};
    CHECK_THROWS_AS(param_count_for(bad), DimensionError);
    CHECK_THROWS_AS(mlp_init(bad, 1), DimensionError);
  }

  TEST_CASE("init is a pure function of the seed") {
    const std::vector<LayerSpec> spec{{2, 2, Activation::kReLU}, {2, 1, Activation::kIdentity}};
    const MlpModel a = mlp_init(spec, 77), b = mlp_init(spec, 77), c = mlp_init(spec, 78);
    const auto pa = std::vector<double>(a.params().begin(), a.params().end());
    CHECK(pa == std::vector<double>(b.params().begin(), b.params().end()));
    CHECK(pa != std::vector<double>(c.params().begin(), c.params().end()));
  }

  TEST_CASE("zero parameters give uniform probabilities and zero input gradient") {
    const std::vector<LayerSpec> spec{{5, 4, Activation::kReLU}, {4, 3, Activation::kIdentity}};
    const MlpModel m(spec, std::vector<double>(param_count_for(spec), 0.0), 0);
    const auto x = testutil::random_vector(5, 8);
    const ForwardPass pass = forward(m, x);
    for (double p : softmax(pass.logits())) CHECK(p == doctest::Approx(1.0 / 3.0));
    for (double g : grad_input(m, x, 1)) CHECK(g == 0.0);
  }

  TEST_CASE("identity layer passes the input through") {
    const MlpModel m({{3, 3, Activation::kIdentity}}, {1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0}, 0);
    const std::vector<double> x{0.25, -1.5, 4};
    const ForwardPass pass = forward(m, x);
    CHECK(std::vector<double>(pass.logits().begin(), pass.logits().end()) == x);
  }

  TEST_CASE("hand net on input (1,0)") {
    // z1 = (1, 2 - 1) = (1, 1) -> h = (1, 1); z2 = (1 + 1 + 0.5, -1 + 2)
    const ForwardPass pass = forward(hand_net(), std::vector<double>{1, 0});
    const auto z = pass.logits();
    CHECK(z[0] == doctest::Approx(2.5));
    CHECK(z[1] == doctest::Approx(1.0));
  }

  TEST_CASE("softmax output layer only changes the reported logits") {
    const MlpModel lin({{2, 3, Activation::kIdentity}}, {1, 2, -1, 0.5, 0, 3, 0.1, 0.2, 0.3}, 0);
    const MlpModel soft({{2, 3, Activation::kSoftmax}}, {1, 2, -1, 0.5, 0, 3, 0.1, 0.2, 0.3}, 0);
    const std::vector<double> x{0.3, 0.7};
    CHECK(predict(lin, x) == predict(soft, x));
    CHECK(loss(lin, x, 2) == doctest::Approx(loss(soft, x, 2)));
  }

  TEST_CASE("linear softmax model gradient has the closed form") {
    const std::vector<double> w{1, 2, -1, 0.5, 0, 3, 0.1, -0.2, 0.3, 0.2, 0.2, 0.4};
    const MlpModel m({{3, 3, Activation::kIdentity}}, w, 0);
    const std::vector<double> x{0.3, 0.7, 0.1};
    std::vector<double> z(3);
    for (int k = 0; k < 3; ++k) z[k] = w[3 * k] * x[0] + w[3 * k + 1] * x[1] + w[3 * k + 2] * x[2] + w[9 + k];
    double norm = 0;
    for (double v : z) norm += std::exp(v);
    const std::size_t y = 1;
    const auto g = grad_input(m, x, y);
    for (int i = 0; i < 3; ++i) {
      double expect = 0;
      for (int k = 0; k < 3; ++k) expect += (std::exp(z[k]) / norm - (k == int(y) ? 1.0 : 0.0)) * w[3 * k + i];
      CHECK(g[i] == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  TEST_CASE("accuracy counts matches") {
    // Constant class 1 through a large bias.
    const MlpModel m({{2, 2, Activation::kIdentity}}, {0, 0, 0, 0, 0, 5}, 0);
    Dataset d;
    d.num_classes = 2;
    for (int i = 0; i < 10; ++i) d.examples.push_back({{0.5, 0.5}, i < 3 ? 1u : 0u});
    CHECK(accuracy(m, d) == doctest::Approx(0.3));
  }

  TEST_CASE("untrained net on random labels is near chance") {
    Rng rng(3);
    Dataset d;
    d.num_classes = 10;
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> x(8);
      for (double& v : x) v = rng.uniform();
      d.examples.push_back({x, static_cast<std::size_t>(rng.below(10))});
    }
    const MlpModel m = mlp_init({{8, 16, Activation::kReLU}, {16, 10, Activation::kIdentity}}, 4);
    CHECK(std::abs(accuracy(m, d) - 0.1) <= 0.05);
  }

  TEST_CASE("masked parameters stay fixed during training") {
    const Dataset d = blobs();
    const std::vector<LayerSpec> spec{{2, 4, Activation::kReLU}, {4, 2, Activation::kIdentity}};
    const MlpModel free = mlp_init(spec, 5);
    std::vector<std::uint8_t> flags(free.param_count(), 1);
    std::vector<double> p(free.params().begin(), free.params().end());
    for (std::size_t i = 0; i < p.size(); i += 3) {
      flags[i] = 0;
      p[i] = 0.0;
    }
    const MlpModel masked(spec, p, 5, flags);
    TrainConfig tc;
    tc.max_epochs = 5;
    tc.learning_rate = 0.2;
    const TrainResult r = train(masked, d, tc);
    for (std::size_t i = 0; i < p.size(); i += 3) CHECK(r.model.params()[i] == 0.0);
    CHECK(r.model.trainable().size() == p.size());
  }

  TEST_CASE("model file round trip") {
    const MlpModel m = random_net(21);
    const auto path = std::filesystem::temp_directory_path() / "rlab_test_model.rlab";
    save_model(m, path);
    const MlpModel back = load_model(path);
    CHECK(serialize_model(back) == serialize_model(m));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_model(path), Error);
  }
}
