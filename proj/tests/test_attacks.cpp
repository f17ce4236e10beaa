#include <doctest.h>

#include "raw/attacks.hpp"
#include "raw/data.hpp"
#include "raw/error.hpp"

#include <algorithm>
#include <cmath>

using namespace raw;

namespace {

struct Fixture {
  Dataset train_set, test_set;
  Model victim;

  Fixture() {
    GenSpec gs;
    auto [tr, te] = split(generate(gs, 3), 0.5, 4);
    train_set = tr;
    test_set = te;
    TrainConfig tc;
    tc.seed = 10;
    victim = train(init_model(family_spec(default_family('A'), 8, 4), 10), train_set, tc);
    victim.provenance.id = "victim";
  }

  ExtractionConfig config(AttackKind kind, std::uint64_t seed, char family = 'A') const {
    ExtractionConfig c;
    c.kind = kind;
    c.surrogate_spec = family_spec(default_family(family), 8, 4);
    c.train_cfg.seed = seed;
    if (kind == AttackKind::distillation) c.distill_temperature = 1.0;
    if (kind == AttackKind::transfer_learning) c.frozen_layers = 1;
    return c;
  }
};

std::size_t zero_weights(const Model& m) {
  std::size_t z = 0;
  for (const auto& p : m.params) z += static_cast<std::size_t>((p.weight.array() == 0.0).count());
  return z;
}

std::size_t weight_count(const Model& m) {
  std::size_t n = 0;
  for (const auto& p : m.params) n += static_cast<std::size_t>(p.weight.size());
  return n;
}

}  // namespace

TEST_CASE("attack names") {
  for (auto k : {AttackKind::retraining, AttackKind::distillation, AttackKind::transfer_learning,
                 AttackKind::cross_arch_retraining, AttackKind::copycat})
    CHECK(parse_attack_kind(abbreviation(k)) == k);
  CHECK(abbreviation(AttackKind::retraining) == "RET");
  CHECK_THROWS_AS(parse_attack_kind("XYZ"), ConfigError);
  CHECK(parse_blur_method("WQ") == BlurConfig::Method::weight_quantization);
  CHECK_THROWS_AS(parse_blur_method("WX"), ConfigError);
}

TEST_CASE("extraction config validation") {
  ExtractionConfig c;
  c.surrogate_spec = family_spec(default_family('A'), 8, 4);
  CHECK_NOTHROW(c.validate());
  c.query_budget_fraction = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.query_budget_fraction = 0.5;
  c.kind = AttackKind::distillation;
  CHECK_THROWS_AS(c.validate(), ConfigError);  // temperature missing
  c.distill_temperature = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.distill_temperature = 2.0;
  CHECK_NOTHROW(c.validate());
  c.kind = AttackKind::retraining;
  CHECK_THROWS_AS(c.validate(), ConfigError);  // temperature on a non-distillation attack
  c.distill_temperature.reset();
  c.kind = AttackKind::transfer_learning;
  CHECK_THROWS_AS(c.validate(), ConfigError);  // frozen_layers missing
}

TEST_CASE("extraction attacks") {
  const Fixture f;

  SUBCASE("retraining issues exactly the budgeted queries and records provenance") {
    CHECK(query_count(f.train_set.size(), 0.5) == 250);
    const Model m = extract_retraining(f.victim, f.train_set.features, f.config(AttackKind::retraining, 7));
    CHECK(m.provenance.lineage.size() == 1);
    CHECK(m.provenance.lineage[0].kind == LineageStep::Kind::extracted);
    CHECK(m.provenance.lineage[0].method == "RET");
    CHECK(m.provenance.lineage[0].ref_id == "victim");
    CHECK(m.provenance.id == "RET(victim)#7");
    CHECK(identical(m, extract_retraining(f.victim, f.train_set.features, f.config(AttackKind::retraining, 7))));
  }

  SUBCASE("extracted surrogates agree with the victim more than independent models") {
    // Same data volume on both sides: the surrogate queries every training row.
    double extracted = 0.0, independent = 0.0;
    const int n = 4;
    for (int i = 0; i < n; ++i) {
      const auto seed = static_cast<std::uint64_t>(100 + i);
      auto cfg = f.config(AttackKind::retraining, seed);
      cfg.query_budget_fraction = 1.0;
      const Model e = extract_retraining(f.victim, f.train_set.features, cfg);
      TrainConfig tc;
      tc.seed = seed;
      const Model fresh = train(init_model(family_spec(default_family('A'), 8, 4), seed), f.train_set, tc);
      extracted += agreement(e, f.victim, f.test_set.features);
      independent += agreement(fresh, f.victim, f.test_set.features);
    }
    CHECK(extracted / n >= independent / n);
  }

  SUBCASE("distillation") {
    const Model m = extract_distillation(f.victim, f.train_set.features, f.config(AttackKind::distillation, 8));
    CHECK(m.provenance.lineage[0].method == "DIS");
    CHECK(agreement(m, f.victim, f.test_set.features) > 0.5);
  }

  SUBCASE("transfer learning keeps the frozen layer and fits the head") {
    TrainConfig tc;
    tc.seed = 55;
    const Model pre = train(init_model(family_spec(default_family('A'), 8, 4), 55), generate(GenSpec{}, 99), tc);
    const auto cfg = f.config(AttackKind::transfer_learning, 9);
    const Model m = extract_transfer(f.victim, pre, f.train_set.features, cfg);
    CHECK(m.params[0].weight == pre.params[0].weight);
    CHECK(m.params[0].bias == pre.params[0].bias);
    CHECK(m.params.back().weight != pre.params.back().weight);
    CHECK(m.provenance.lineage[0].method == "TRL");

    auto too_many = cfg;
    too_many.frozen_layers = pre.spec.dense_count();
    CHECK_THROWS_AS(extract_transfer(f.victim, pre, f.train_set.features, too_many), ConfigError);
    const Model other = init_model(family_spec(default_family('B'), 8, 4), 1);
    CHECK_THROWS_AS(extract_transfer(f.victim, other, f.train_set.features, cfg), SpecError);
    CHECK_THROWS_AS(extract(f.victim, f.train_set.features, cfg, nullptr), ConfigError);
  }

  SUBCASE("cross-architecture retraining uses the requested family") {
    const Model m =
        extract(f.victim, f.train_set.features, f.config(AttackKind::cross_arch_retraining, 4, 'C'));
    CHECK(m.spec == family_spec(default_family('C'), 8, 4));
    CHECK(m.provenance.lineage[0].method == "CAR");
  }

  SUBCASE("copycat") {
    const Matrix probes = random_probe_inputs(400, 8, -1.0, 1.0, 5);
    const Model m = extract_copycat(f.victim, probes, f.config(AttackKind::copycat, 6));
    CHECK(m.provenance.lineage[0].method == "CPY");
    CHECK_THROWS_AS(extract_copycat(f.victim, Matrix(0, 8), f.config(AttackKind::copycat, 6)), InputError);
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(extract_retraining(f.victim, Matrix::Zero(10, 5), f.config(AttackKind::retraining, 1)),
                    InputError);
    auto c = f.config(AttackKind::retraining, 1);
    c.surrogate_spec = family_spec(default_family('A'), 8, 3);
    CHECK_THROWS_AS(extract_retraining(f.victim, f.train_set.features, c), SpecError);
    c = f.config(AttackKind::retraining, 1);
    c.query_budget_fraction = 0.01;
    CHECK_THROWS_AS(extract_retraining(f.victim, f.train_set.features.topRows(10), c), InputError);
    CHECK_THROWS_AS(extract_distillation(f.victim, f.train_set.features, f.config(AttackKind::retraining, 1)),
                    ConfigError);
  }
}

TEST_CASE("pruning") {
  Model m = init_model(family_spec(default_family('B'), 8, 4), 12);
  m.provenance.id = "parent";
  const std::size_t total = weight_count(m);

  for (double s : {0.0, 0.25, 0.5, 0.9}) {
    const Model p = blur_prune(m, s);
    CHECK(zero_weights(p) == static_cast<std::size_t>(std::floor(s * static_cast<double>(total))));
    for (std::size_t l = 0; l < m.params.size(); ++l) CHECK(p.params[l].bias == m.params[l].bias);
  }

  SUBCASE("the smallest magnitudes go first") {
    const Model p = blur_prune(m, 0.5);
    double largest_pruned = 0.0, smallest_kept = INFINITY;
    for (std::size_t l = 0; l < m.params.size(); ++l)
      for (Eigen::Index i = 0; i < m.params[l].weight.size(); ++i) {
        const double w = std::abs(m.params[l].weight.data()[i]);
        if (p.params[l].weight.data()[i] == 0.0) largest_pruned = std::max(largest_pruned, w);
        else smallest_kept = std::min(smallest_kept, w);
      }
    CHECK(largest_pruned <= smallest_kept);
  }
  SUBCASE("lineage") {
    const Model p = blur(m, BlurConfig{BlurConfig::Method::weight_pruning, 0.5, 8});
    CHECK(p.provenance.id == "WP(parent)");
    CHECK(p.provenance.lineage.back().kind == LineageStep::Kind::blurred);
    CHECK(p.provenance.lineage.back().ref_id == "parent");
  }
  CHECK_THROWS_AS(blur_prune(m, 1.0), ConfigError);
  CHECK_THROWS_AS(blur_prune(m, -0.1), ConfigError);
}

TEST_CASE("quantization") {
  const Model m = init_model(family_spec(default_family('A'), 8, 4), 13);
  Model with_bias = m;
  for (auto& p : with_bias.params) p.bias.setConstant(0.01);

  for (int bits : {1, 2, 4, 8}) {
    const Model q = blur_quantize(with_bias, bits);
    const long top = (1L << bits) - 1;
    for (std::size_t l = 0; l < q.params.size(); ++l) {
      const auto& src = with_bias.params[l];
      const double lo = std::min(src.weight.minCoeff(), src.bias.minCoeff());
      const double hi = std::max(src.weight.maxCoeff(), src.bias.maxCoeff());
      const double step = (hi - lo) / static_cast<double>(top);
      std::vector<double> grid;
      for (long k = 0; k <= top; ++k) grid.push_back(quantization_level(lo, hi, bits, k));
      for (Eigen::Index i = 0; i < src.weight.size(); ++i) {
        const double v = src.weight.data()[i], qv = q.params[l].weight.data()[i];
        REQUIRE(std::abs(v - qv) <= step / 2.0 + 1e-12);
        REQUIRE(std::find(grid.begin(), grid.end(), qv) != grid.end());
      }
      for (Eigen::Index i = 0; i < src.bias.size(); ++i)
        REQUIRE(std::abs(src.bias(i) - q.params[l].bias(i)) <= step / 2.0 + 1e-12);
    }
  }

  CHECK(quantization_level(-1.0, 3.0, 2, 0) == -1.0);
  CHECK(quantization_level(-1.0, 3.0, 2, 3) == 3.0);

  SUBCASE("constant layers are left alone") {
    Model c = m;
    c.params[0].weight.setConstant(0.2);
    c.params[0].bias.setConstant(0.2);
    CHECK(blur_quantize(c, 4).params[0].weight == c.params[0].weight);
  }
  CHECK_THROWS_AS(blur_quantize(m, 0), ConfigError);
  CHECK_THROWS_AS(blur_quantize(m, 17), ConfigError);
}

TEST_CASE("blurred models stay close to their parents") {
  const Fixture f;
  const Model e = extract_retraining(f.victim, f.train_set.features, Fixture{}.config(AttackKind::retraining, 21));
  const double base = accuracy(e, f.test_set.features, f.test_set.labels);
  CHECK(std::abs(accuracy(blur_prune(e, 0.5), f.test_set.features, f.test_set.labels) - base) <= 0.10);
  CHECK(std::abs(accuracy(blur_quantize(e, 8), f.test_set.features, f.test_set.labels) - base) <= 0.10);
}
