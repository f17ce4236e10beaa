#include <doctest.h>

#include "raw/attacks.hpp"
#include "raw/boundary.hpp"
#include "raw/data.hpp"
#include "raw/error.hpp"
#include "raw/rng.hpp"

#include <algorithm>
#include <set>

using namespace raw;

namespace {

PopulationPredictions hand_built(std::vector<std::vector<int>> labels, std::vector<int> truth) {
  PopulationPredictions p;
  for (const auto& l : labels) p.confidences.push_back(Matrix::Zero(static_cast<Eigen::Index>(l.size()), 3));
  p.labels = std::move(labels);
  p.truth = std::move(truth);
  return p;
}

struct Population {
  Dataset eval;
  std::vector<Model> protected_models;
  std::vector<Model> extracted;
};

Population make_population(std::size_t count) {
  auto [train_set, eval] = split(generate(GenSpec{}, 31), 0.5, 32);
  Population pop;
  pop.eval = eval;
  const auto spec = family_spec(default_family('A'), 8, 4);
  for (std::size_t i = 0; i < count; ++i) {
    TrainConfig tc;
    tc.seed = derive_seed(5, "model", i);
    Model m = train(init_model(spec, tc.seed), train_set, tc);
    m.provenance.id = "m" + std::to_string(i);
    ExtractionConfig ec;
    ec.surrogate_spec = spec;
    ec.train_cfg.seed = derive_seed(5, "extract", i);
    pop.extracted.push_back(extract_retraining(m, train_set.features, ec));
    pop.protected_models.push_back(std::move(m));
  }
  return pop;
}

}  // namespace

TEST_CASE("set finders on a hand-built population") {
  // rows:            0  1  2  3  4
  const auto pop = hand_built({{0, 1, 2, 0, 1},   //
                               {0, 1, 1, 2, 1},   //
                               {0, 2, 1, 0, 1}},  //
                              {0, 1, 1, 0, 1});
  CHECK(find_disagreements(pop) == IndexSet{1, 2, 3});
  CHECK(find_unique_disagreements(pop, 0, pop.truth) == IndexSet{2});
  CHECK(find_unique_disagreements(pop, 1, pop.truth) == IndexSet{3});
  CHECK(find_unique_disagreements(pop, 2, pop.truth) == IndexSet{1});
  // extracted partner of model 0 repeats its mistake on row 2
  CHECK(find_transferable({2}, pop.labels[0], {0, 1, 2, 0, 0}, pop.truth) == IndexSet{2});
  CHECK(find_transferable({2}, pop.labels[0], {0, 1, 0, 0, 0}, pop.truth).empty());

  SUBCASE("agreement everywhere") {
    const auto same = hand_built({{0, 1}, {0, 1}}, {0, 1});
    CHECK(find_disagreements(same).empty());
    CHECK(find_unique_disagreements(same, 0, same.truth).empty());
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(find_disagreements(hand_built({{0, 1}}, {0, 1})), InputError);
    CHECK_THROWS_AS(find_unique_disagreements(pop, 3, pop.truth), InputError);
    CHECK_THROWS_AS(find_unique_disagreements(pop, 0, {0, 1}), InputError);
    CHECK_THROWS_AS(find_transferable({9}, pop.labels[0], pop.labels[1], pop.truth), InputError);
    CHECK_THROWS_AS(parse_strategy("half"), ConfigError);
  }
}

TEST_CASE("trained population") {
  const Population pop = make_population(10);
  const auto preds = PopulationPredictions::of(pop.protected_models, pop.eval.features, pop.eval.labels);
  const auto n = preds.row_count();

  // Brute-force recounts.
  IndexSet dis;
  for (std::size_t i = 0; i < n; ++i) {
    std::set<int> classes;
    for (const auto& l : preds.labels) classes.insert(l[i]);
    if (classes.size() > 1) dis.push_back(i);
  }
  CHECK(find_disagreements(preds) == dis);
  CHECK_FALSE(dis.empty());

  std::size_t any_unique = 0, any_transferable = 0;
  for (std::size_t m = 0; m < preds.model_count(); ++m) {
    IndexSet uniq;
    for (std::size_t i = 0; i < n; ++i) {
      bool others_right = true;
      for (std::size_t o = 0; o < preds.model_count(); ++o)
        if (o != m && preds.labels[o][i] != preds.truth[i]) others_right = false;
      if (preds.labels[m][i] != preds.truth[i] && others_right) uniq.push_back(i);
    }
    const auto unique = find_unique_disagreements(preds, m, preds.truth);
    CHECK(unique == uniq);
    const auto ext = predict(pop.extracted[m], pop.eval.features);
    const auto tr = find_transferable(unique, preds.labels[m], ext, preds.truth);
    CHECK(std::includes(unique.begin(), unique.end(), tr.begin(), tr.end()));
    CHECK(std::includes(dis.begin(), dis.end(), unique.begin(), unique.end()));
    for (auto i : tr) CHECK(ext[i] == preds.labels[m][i]);
    any_unique += unique.size();
    any_transferable += tr.size();
  }
  CHECK(any_unique > 0);
  CHECK(any_transferable > 0);

  SUBCASE("strategy analysis") {
    const BimConfig bim;
    const auto none = run_strategy_analysis(pop.protected_models, pop.extracted, pop.eval, Strategy::none, bim);
    CHECK(none.disagreement_share == doctest::Approx(static_cast<double>(dis.size()) / n));
    CHECK(none.disagreement_share > 0.0);
    CHECK(none.unique_share > 0.0);
    CHECK(none.transferable_share > 0.0);
    CHECK(none.transferable_share <= none.unique_share);
    CHECK(none.unique_share <= none.disagreement_share);

    const auto strengthened =
        run_strategy_analysis(pop.protected_models, pop.extracted, pop.eval, Strategy::disagreements, bim);
    CHECK(strengthened.mean_transferable_confidence >= none.mean_transferable_confidence);

    const std::vector<SubsetReport> rows{none, strengthened};
    const std::string csv = subset_table_csv(rows);
    CHECK(csv.starts_with("strategy,disagreements,unique,transferable,confidence\n"));
    CHECK(csv.find("\ndisagreements,") != std::string::npos);
  }

  SUBCASE("bim strengthens the disagreement subset") {
    const auto shift = bim_confidence_shift(pop.protected_models, pop.eval.features, dis, BimConfig{});
    CHECK(shift.points == dis.size() * pop.protected_models.size());
    CHECK(shift.after > shift.before);
  }

  SUBCASE("errors") {
    std::vector<Model> one{pop.protected_models[0]};
    CHECK_THROWS_AS(run_strategy_analysis(one, one, pop.eval, Strategy::none, BimConfig{}), InputError);
    std::vector<Model> fewer(pop.extracted.begin(), pop.extracted.begin() + 3);
    CHECK_THROWS_AS(run_strategy_analysis(pop.protected_models, fewer, pop.eval, Strategy::none, BimConfig{}),
                    InputError);
  }
}

TEST_CASE("agreeing population has empty subsets") {
  Population pop = make_population(1);
  std::vector<Model> clones(3, pop.protected_models[0]);
  std::vector<Model> partners(3, pop.extracted[0]);
  const auto r = run_strategy_analysis(clones, partners, pop.eval, Strategy::none, BimConfig{});
  CHECK(r.disagreement_share == 0.0);
  CHECK(r.unique_share == 0.0);
  CHECK(r.transferable_share == 0.0);
}
