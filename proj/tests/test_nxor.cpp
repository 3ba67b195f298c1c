#include <doctest.h>

#include <algorithm>
#include <map>

#include "rlab/error.hpp"
#include "rlab/nxor.hpp"

using namespace rlab;

namespace {

// Direct truth-table count for the canonical base with one redundant input.
std::size_t oracle_adv(int w1, int w2) {
  std::size_t wrong = 0;
  for (int x1 = 0; x1 < 2; ++x1)
    for (int x2 = 0; x2 < 2; ++x2)
      for (int x3 = 0; x3 < 2; ++x3) {
        const bool h1 = x1 + x2 + w1 * x3 > 1.5;
        const bool h2 = -x1 - x2 + w2 * x3 > -0.5;
        const bool y = int(h1) + int(h2) > 0.5;
        if (y != (x1 == x2)) ++wrong;
      }
  return wrong;
}

}  // namespace

TEST_SUITE("nxor") {
  TEST_CASE("base truth table") {
    const ThresholdNetwork net = canonical_base();
    CHECK(net.redundant_inputs() == 1);
    CHECK(net.evaluate(std::vector<int>{1, 1, 0}) == 1);
    CHECK(net.evaluate(std::vector<int>{0, 1, 0}) == 0);
    CHECK(net.evaluate(std::vector<int>{1, 0, 0}) == 0);
    CHECK(net.evaluate(std::vector<int>{0, 0, 0}) == 1);
  }

  TEST_CASE("x3 = 0 disables the redundant edges") {
    for (int w1 = -1; w1 <= 1; ++w1)
      for (int w2 = -1; w2 <= 1; ++w2) {
        const std::pair<int, int> w[] = {{w1, w2}};
        const ThresholdNetwork net = canonical_base().with_redundant(w);
        for (int x1 = 0; x1 < 2; ++x1)
          for (int x2 = 0; x2 < 2; ++x2) CHECK(net.evaluate(std::vector<int>{x1, x2, 0}) == int(x1 == x2));
      }
  }

  TEST_CASE("suppression table matches the truth-table oracle") {
    const auto rows = enumerate_suppression(canonical_base());
    REQUIRE(rows.size() == 9);
    const std::size_t frozen[9] = {2, 1, 3, 1, 0, 2, 3, 2, 2};
    std::size_t i = 0;
    for (int w1 = -1; w1 <= 1; ++w1)
      for (int w2 = -1; w2 <= 1; ++w2, ++i) {
        CHECK(rows[i].w1 == w1);
        CHECK(rows[i].w2 == w2);
        CHECK(rows[i].adv_count == oracle_adv(w1, w2));
        CHECK(rows[i].adv_count == frozen[i]);
        CHECK(rows[i].allowing_edges == std::size_t(w1 != 0) + std::size_t(w2 != 0));
        CHECK(rows[i].potential == std::size_t(std::abs(w1 + w2)));
      }
  }

  TEST_CASE("origin row and the edge/potential multiset") {
    const auto rows = enumerate_suppression(canonical_base());
    std::map<std::pair<std::size_t, std::size_t>, int> multiset;
    for (const auto& r : rows) {
      ++multiset[{r.allowing_edges, r.potential}];
      CHECK((r.adv_count == 0) == (r.w1 == 0 && r.w2 == 0));
    }
    const std::map<std::pair<std::size_t, std::size_t>, int> expect{{{0, 0}, 1}, {{1, 1}, 4}, {{2, 0}, 2}, {{2, 2}, 2}};
    CHECK(multiset == expect);
    CHECK(rows[4].adv_count == 0);
    CHECK(rows[4].allowing_edges == 0);
    CHECK(rows[4].potential == 0);
  }

  TEST_CASE("generalized enumeration") {
    const ThresholdNetwork base = canonical_base();
    const GeneralizedSummary zero = generalized_enumerate(0, base);
    REQUIRE(zero.rows.size() == 1);
    CHECK(zero.rows[0].adv_count == 0);
    CHECK(zero.input_space == 4);

    const GeneralizedSummary one = generalized_enumerate(1, base);
    const auto table = enumerate_suppression(base);
    REQUIRE(one.rows.size() == 9);
    for (std::size_t i = 0; i < 9; ++i) {
      CHECK(one.rows[i].weights[0] == std::make_pair(table[i].w1, table[i].w2));
      CHECK(one.rows[i].adv_count == table[i].adv_count);
    }

    const GeneralizedSummary two = generalized_enumerate(2, base);
    CHECK(two.rows.size() == 81);
    CHECK(two.input_space == 16);
    std::size_t total = 0;
    for (const auto& [key, count] : two.distribution) total += count;
    CHECK(total == 81);
    const auto all_zero = std::find_if(two.rows.begin(), two.rows.end(), [](const GeneralizedRow& r) {
      return std::all_of(r.weights.begin(), r.weights.end(), [](auto w) { return w.first == 0 && w.second == 0; });
    });
    REQUIRE(all_zero != two.rows.end());
    CHECK(all_zero->adv_count == 0);
    // exactly one zero-adversarial configuration: full suppression
    CHECK(std::count_if(two.rows.begin(), two.rows.end(), [](const GeneralizedRow& r) { return r.adv_count == 0; }) ==
          1);
  }

  TEST_CASE("enumeration limits") {
    CHECK_THROWS_AS(generalized_enumerate(6, canonical_base()), ValidationError);
    CHECK_THROWS_AS(generalized_enumerate(kMaxRedundantBits + 1, canonical_base(), SIZE_MAX), ValidationError);
    CHECK_NOTHROW(generalized_enumerate(5, canonical_base()));
  }

  TEST_CASE("a base that does not compute equality is rejected") {
    const ThresholdUnit h1{{1, 1, 0}, 1.5}, h2{{-1, -1, 0}, -0.5};
    CHECK_NOTHROW(ThresholdNetwork({h1, h2}, ThresholdUnit{{1, 1}, 0.5}));
    CHECK_THROWS_AS(ThresholdNetwork({h1, h2}, ThresholdUnit{{1, 1}, 1.5}), ValidationError);
    const ThresholdUnit short_unit{{1, 1}, 1.5};
    CHECK_THROWS_AS(ThresholdNetwork({short_unit, h2}, ThresholdUnit{{1, 1}, 0.5}), Error);
  }
}
