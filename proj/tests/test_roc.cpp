#include <doctest.h>

#include "raw/error.hpp"
#include "raw/rng.hpp"
#include "raw/roc.hpp"

#include "oracles.hpp"

#include <cmath>

using namespace raw;

TEST_CASE("hand-checked curves") {
  SUBCASE("perfect separation") {
    const std::vector<double> pos{0.9, 0.8}, neg{0.1, 0.2};
    const auto roc = roc_auc(pos, neg);
    CHECK(roc.auc == 1.0);
    CHECK(roc.tpr_at_fpr0 == 1.0);
    CHECK(roc.fpr_at_tpr1 == 0.0);
  }
  SUBCASE("all tied") {
    const std::vector<double> pos{0.5, 0.5}, neg{0.5};
    const auto roc = roc_auc(pos, neg);
    CHECK(roc.auc == 0.5);
    CHECK(roc.points.size() == 2);
    CHECK(roc.tpr_at_fpr0 == 0.0);
    CHECK(roc.fpr_at_tpr1 == 1.0);
  }
  SUBCASE("inverted") {
    const std::vector<double> pos{0.1}, neg{0.9};
    CHECK(roc_auc(pos, neg).auc == 0.0);
  }
  SUBCASE("partial ties") {
    const std::vector<double> pos{0.8, 0.5, 0.3}, neg{0.5, 0.2};
    // pairs: (0.8>0.5,0.8>0.2)=2, (0.5=0.5 -> .5, 0.5>0.2)=1.5, (0.3<0.5, 0.3>0.2)=1 -> 4.5/6
    CHECK(roc_auc(pos, neg).auc == 0.75);
  }
  CHECK_THROWS_AS(roc_auc(std::vector<double>{}, std::vector<double>{0.1}), InputError);
  CHECK_THROWS_AS(roc_auc(std::vector<double>{NAN}, std::vector<double>{0.1}), InputError);
}

TEST_CASE("AUC equals pairwise Mann-Whitney") {
  Rng rng(1234);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t np = 1 + rng.below(40), nn = 1 + rng.below(40);
    const bool coarse = trial % 3 == 0;
    std::vector<double> pos(np), neg(nn);
    for (auto& v : pos) v = coarse ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform() + 0.2;
    for (auto& v : neg) v = coarse ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform();
    const auto roc = roc_auc(pos, neg);
    REQUIRE(std::abs(roc.auc - test::mann_whitney(pos, neg)) <= 1e-12);
    REQUIRE(std::abs(trapezoid_auc(roc.points) - roc.auc) <= 1e-12);

    // Every point is the confusion rate at its own threshold.
    for (std::size_t k = 1; k < roc.points.size(); ++k) {
      const auto& pt = roc.points[k];
      double tp = 0, fp = 0;
      for (double v : pos) tp += v >= pt.threshold;
      for (double v : neg) fp += v >= pt.threshold;
      REQUIRE(pt.tpr == tp / static_cast<double>(np));
      REQUIRE(pt.fpr == fp / static_cast<double>(nn));
    }
    // Summary statistics agree with the points.
    double best_tpr = 0.0, best_fpr = 1.0;
    for (const auto& pt : roc.points) {
      if (pt.fpr == 0.0) best_tpr = std::max(best_tpr, pt.tpr);
      if (pt.tpr == 1.0) best_fpr = std::min(best_fpr, pt.fpr);
    }
    REQUIRE(roc.tpr_at_fpr0 == best_tpr);
    REQUIRE(roc.fpr_at_tpr1 == best_fpr);
    REQUIRE(roc.points.front().fpr == 0.0);
    REQUIRE(roc.points.back().tpr == 1.0);
    REQUIRE(roc.points.back().fpr == 1.0);
  }
}

TEST_CASE("sign test") {
  CHECK(sign_test_p(5, 5) == doctest::Approx(1.0 / 32.0).epsilon(1e-12));
  CHECK(sign_test_p(0, 5) == doctest::Approx(1.0));
  CHECK(sign_test_p(4, 5) == doctest::Approx(6.0 / 32.0).epsilon(1e-12));
  CHECK(sign_test_p(15, 20) == doctest::Approx(21700.0 / 1048576.0).epsilon(1e-12));
  CHECK_THROWS_AS(sign_test_p(6, 5), InputError);
  CHECK_THROWS_AS(sign_test_p(0, 0), InputError);
}

TEST_CASE("csv round-trip") {
  const std::vector<double> pos{0.9, 0.4, 0.4}, neg{0.4, 0.1};
  const auto roc = roc_auc(pos, neg);
  const auto back = parse_roc_points_csv(roc_points_csv(roc));
  REQUIRE(back.size() == roc.points.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].fpr == roc.points[i].fpr);
    CHECK(back[i].tpr == roc.points[i].tpr);
    CHECK(back[i].threshold == roc.points[i].threshold);
  }
  CHECK(std::isinf(back.front().threshold));
  CHECK_THROWS_AS(parse_roc_points_csv("a,b\n"), FormatError);
  CHECK_THROWS_AS(parse_roc_points_csv("fpr,tpr,threshold\n0,x,1\n"), FormatError);
}
