#include <doctest.h>

#include "raw/attacks.hpp"
#include "raw/data.hpp"
#include "raw/error.hpp"
#include "raw/rng.hpp"
#include "raw/watermark.hpp"

#include "oracles.hpp"

#include <cmath>

using namespace raw;

namespace {

struct World {
  Dataset train_set, test_set;
  Model protected_model;
  std::vector<Model> extracted, nonextracted;
};

World make_world(std::uint64_t seed, std::size_t per_population = 3) {
  World w;
  auto [tr, te] = split(generate(GenSpec{}, derive_seed(seed, "data")), 0.5, seed);
  w.train_set = tr;
  w.test_set = te;
  const auto spec = family_spec(default_family('A'), 8, 4);
  TrainConfig tc;
  tc.epochs = 15;
  tc.seed = derive_seed(seed, "protected");
  w.protected_model = train(init_model(spec, tc.seed), tr, tc);
  w.protected_model.provenance.id = "protected";
  for (std::size_t i = 0; i < per_population; ++i) {
    ExtractionConfig ec;
    ec.surrogate_spec = spec;
    ec.train_cfg = tc;
    ec.train_cfg.seed = derive_seed(seed, "extracted", i);
    w.extracted.push_back(extract_retraining(w.protected_model, tr.features, ec));
    TrainConfig fc = tc;
    fc.seed = derive_seed(seed, "fresh", i);
    w.nonextracted.push_back(train(init_model(spec, fc.seed), tr, fc));
  }
  return w;
}

}  // namespace

TEST_CASE("top-n selection by gap") {
  const std::vector<double> e{1.0, 0.5, 0.25, 0.875, 0.5};
  const std::vector<double> ne{0.25, 0.5, 0.75, 0.375, 0.0};
  // gaps 0.75, 0, 0.5, 0.5, 0.5 -> ties resolved by position
  CHECK(select_top_by_gap(e, ne, 3) == std::vector<std::size_t>{0, 2, 3});
  CHECK(select_top_by_gap(e, ne, 0).empty());
  CHECK_THROWS_AS(select_top_by_gap(e, ne, 6), InputError);
  CHECK_THROWS_AS(select_top_by_gap(e, std::vector<double>{0.1}, 1), InputError);

  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.below(50);
    std::vector<double> a(m), b(m);
    for (std::size_t i = 0; i < m; ++i) {
      // coarse grid to force ties
      a[i] = static_cast<double>(rng.below(8)) / 8.0;
      b[i] = static_cast<double>(rng.below(8)) / 8.0;
    }
    const std::size_t n = rng.below(m + 1);
    REQUIRE(select_top_by_gap(a, b, n) == test::exhaustive_top_gap(a, b, n));
  }
}

TEST_CASE("key-set generation") {
  const World w = make_world(11);
  KeySetConfig cfg;
  cfg.size = 16;

  const KeySet ks = generate_keyset(w.protected_model, w.extracted, w.nonextracted, w.test_set, cfg);
  CHECK(ks.size() == 16);
  CHECK(ks.protected_id == "protected");
  CHECK_NOTHROW(ks.check());

  SUBCASE("matches the recomputed candidate pipeline") {
    const auto oracle = test::recompute_candidates(w.protected_model, w.extracted, w.nonextracted,
                                                   w.test_set.features, w.test_set.labels, cfg.bim);
    const auto pick = test::exhaustive_top_gap(oracle.conf_e, oracle.conf_ne, cfg.size);
    for (std::size_t k = 0; k < pick.size(); ++k) {
      CHECK(ks.source_indices[k] == oracle.rows[pick[k]]);
      CHECK(ks.labels[k] == oracle.labels[pick[k]]);
      CHECK((ks.watermarks.row(static_cast<Eigen::Index>(k)).transpose() - oracle.inputs[pick[k]])
                .cwiseAbs()
                .maxCoeff() == 0.0);
    }
  }
  SUBCASE("labels are the protected model's predictions and differ from the truth") {
    CHECK(predict(w.protected_model, ks.watermarks) == ks.labels);
    for (std::size_t k = 0; k < ks.size(); ++k)
      CHECK(ks.labels[k] != w.test_set.labels[ks.source_indices[k]]);
  }
  SUBCASE("watermarks stay in the BIM ball of their source rows") {
    for (std::size_t k = 0; k < ks.size(); ++k) {
      const auto src = w.test_set.features.row(static_cast<Eigen::Index>(ks.source_indices[k]));
      CHECK((ks.watermarks.row(static_cast<Eigen::Index>(k)) - src).cwiseAbs().maxCoeff() <=
            cfg.bim.epsilon + 1e-15);
    }
  }
  SUBCASE("deterministic") {
    const KeySet again = generate_keyset(w.protected_model, w.extracted, w.nonextracted, w.test_set, cfg);
    CHECK(again.watermarks == ks.watermarks);
    CHECK(again.config_digest == ks.config_digest);
  }
  SUBCASE("disagreement candidates") {
    KeySetConfig d = cfg;
    d.source = CandidateSource::disagreements;
    const KeySet kd = generate_keyset(w.protected_model, w.extracted, w.nonextracted, w.test_set, d);
    CHECK(kd.size() == 16);
    CHECK(kd.config_digest != ks.config_digest);
  }
  SUBCASE("too many watermarks requested") {
    KeySetConfig big = cfg;
    big.size = 100000;
    try {
      generate_keyset(w.protected_model, w.extracted, w.nonextracted, w.test_set, big);
      FAIL("expected an error");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("only") != std::string::npos);
    }
  }
  SUBCASE("no misclassifications") {
    Dataset clean = w.test_set;
    clean.labels = predict(w.protected_model, clean.features);
    CHECK_THROWS_AS(generate_keyset(w.protected_model, w.extracted, w.nonextracted, clean, cfg),
                    NoWatermarkMaterial);
  }
  SUBCASE("empty populations") {
    CHECK_THROWS_AS(generate_keyset(w.protected_model, {}, w.nonextracted, w.test_set, cfg), InputError);
  }
}

TEST_CASE("logistic regression") {
  SUBCASE("separable") {
    const std::vector<double> e{0.9, 0.8}, ne{0.1, 0.2};
    const auto c = fit_lr(e, ne);
    for (double v : e) CHECK(c.is_extracted(v));
    for (double v : ne) CHECK_FALSE(c.is_extracted(v));
    const auto& lr = std::get<LogisticRegression>(c.model);
    const double boundary = -lr.bias / lr.weight;
    CHECK(boundary > 0.2);
    CHECK(boundary < 0.8);
  }
  SUBCASE("matches an independent optimiser") {
    Rng rng(21);
    for (int trial = 0; trial < 6; ++trial) {
      std::vector<double> e, ne;
      const double shift = trial % 2 ? 0.5 : 0.1;  // separable vs overlapping
      for (int i = 0; i < 12; ++i) e.push_back(rng.uniform(shift, 1.0));
      for (int i = 0; i < 9; ++i) ne.push_back(rng.uniform(0.0, 1.0 - shift));
      const auto lr = std::get<LogisticRegression>(fit_lr(e, ne).model);
      const auto ref = test::profile_search_lr(e, ne, LrOptions{}.l2);
      CAPTURE(trial);
      CHECK(std::abs(lr.weight - ref.w) < 1e-4);
      CHECK(std::abs(lr.bias - ref.b) < 1e-4);
    }
  }
  SUBCASE("monotone decision") {
    const auto c = fit_lr(std::vector<double>{0.6, 0.7, 0.4}, std::vector<double>{0.3, 0.5, 0.1});
    double last = 0.0;
    for (double x = 0.0; x <= 1.0; x += 0.01) {
      const double p = c.probability_extracted(x);
      CHECK(p >= last);
      last = p;
    }
  }
  CHECK_THROWS_AS(fit_lr(std::vector<double>{}, std::vector<double>{0.1}), InputError);
  CHECK_THROWS_AS(fit_lr(std::vector<double>{NAN}, std::vector<double>{0.1}), InputError);
}

TEST_CASE("gaussian naive bayes") {
  const std::vector<double> e{0.7, 0.9, 0.8}, ne{0.1, 0.3, 0.2, 0.4};
  const auto c = fit_gnb(e, ne);
  const auto& g = std::get<GaussianNb>(c.model);
  CHECK(g.mean[1] == doctest::Approx(0.8));
  CHECK(g.variance[1] == doctest::Approx(0.02 / 3.0));
  CHECK(g.prior[1] == doctest::Approx(3.0 / 7.0));
  for (double x : {0.0, 0.25, 0.5, 0.55, 0.75, 1.0}) {
    const double ref = test::gaussian_posterior(x, 0.8, 0.02 / 3.0, 3.0 / 7.0, 0.25, 0.0125, 4.0 / 7.0);
    CHECK(std::abs(c.probability_extracted(x) - ref) < 1e-9);
  }
  SUBCASE("zero variance is floored") {
    const auto z = fit_gnb(std::vector<double>{0.5, 0.5}, std::vector<double>{0.2, 0.3});
    CHECK(std::get<GaussianNb>(z.model).variance[1] == kGnbVarianceFloor);
    CHECK(z.is_extracted(0.5));
  }
}

TEST_CASE("verifier") {
  const World w = make_world(12, 4);
  KeySetConfig cfg;
  cfg.size = 16;
  const KeySet ks = generate_keyset(w.protected_model, w.extracted, w.nonextracted, w.test_set, cfg);

  for (auto kind : {ClassifierKind::logistic_regression, ClassifierKind::gaussian_nb}) {
    const auto v = build_verifier(w.extracted, w.nonextracted, ks, kind);
    CHECK(v.size() == ks.size());
    double se = 0.0, sne = 0.0;
    for (const auto& m : w.extracted) se += verify(m, v, ks).score;
    for (const auto& m : w.nonextracted) sne += verify(m, v, ks).score;
    CHECK(se / 4 > sne / 4);
    CHECK(verify(w.protected_model, v, ks).score >= sne / 4);

    const auto verdict = verify(w.extracted[0], v, ks);
    std::size_t hits = 0;
    for (bool b : verdict.extracted) hits += b;
    CHECK(verdict.score == static_cast<double>(hits) / 16.0);

    const auto back = load_verifier(save_verifier(v));
    for (const auto& m : w.nonextracted) CHECK(verify(m, back, ks).extracted == verify(m, v, ks).extracted);
  }

  SUBCASE("persistence") {
    const KeySet back = load_keyset(save_keyset(ks));
    CHECK(back.watermarks == ks.watermarks);
    CHECK(back.labels == ks.labels);
    CHECK(back.source_indices == ks.source_indices);
    CHECK(back.config_digest == ks.config_digest);
    CHECK_THROWS_AS(load_keyset("{}"), FormatError);
    CHECK_THROWS_AS(load_verifier("[1,2"), FormatError);
  }
  SUBCASE("errors name the watermark") {
    Matrix e = Matrix::Constant(2, 3, 0.5), ne = Matrix::Constant(2, 3, 0.5);
    e(0, 1) = NAN;
    try {
      build_verifier(e, ne, ClassifierKind::logistic_regression);
      FAIL("expected an error");
    } catch (const InputError& err) {
      CHECK(std::string(err.what()).find("watermark 1") != std::string::npos);
    }
  }
  SUBCASE("size mismatch") {
    const auto v = build_verifier(w.extracted, w.nonextracted, ks, ClassifierKind::gaussian_nb);
    CHECK_THROWS_AS(verify_profile(Vector::Zero(3), v), InputError);
  }
  CHECK(parse_classifier_kind("gnb") == ClassifierKind::gaussian_nb);
  CHECK_THROWS_AS(parse_classifier_kind("svm"), ConfigError);
}
