#include "raw/boundary.hpp"

#include "raw/error.hpp"
#include "raw/io.hpp"

#include <sstream>

namespace raw {

void PopulationPredictions::check() const {
  if (labels.size() != confidences.size())
    throw InputError("prediction and confidence tables differ in model count");
  for (std::size_t m = 0; m < labels.size(); ++m)
    if (labels[m].size() != truth.size() ||
        confidences[m].rows() != static_cast<Eigen::Index>(truth.size()))
      throw InputError("model " + std::to_string(m) + " was evaluated on a different row count");
}

PopulationPredictions PopulationPredictions::of(std::span<const Model> models, const Matrix& inputs,
                                                const std::vector<int>& truth) {
  PopulationPredictions pop;
  pop.truth = truth;
  for (const auto& m : models) {
    pop.confidences.push_back(forward(m, inputs));
    pop.labels.push_back(argmax_rows(pop.confidences.back()));
  }
  pop.check();
  return pop;
}

IndexSet find_disagreements(const PopulationPredictions& pop) {
  pop.check();
  if (pop.model_count() < 2) throw InputError("disagreements need at least two models");
  IndexSet out;
  for (std::size_t i = 0; i < pop.row_count(); ++i)
    for (std::size_t m = 1; m < pop.model_count(); ++m)
      if (pop.labels[m][i] != pop.labels[0][i]) {
        out.push_back(i);
        break;
      }
  return out;
}

IndexSet find_unique_disagreements(const PopulationPredictions& pop, std::size_t model_index,
                                   const std::vector<int>& truth) {
  pop.check();
  if (model_index >= pop.model_count())
    throw InputError("model index " + std::to_string(model_index) + " out of range");
  if (truth.size() != pop.row_count()) throw InputError("truth length does not match predictions");
  IndexSet out;
  for (std::size_t i = 0; i < pop.row_count(); ++i) {
    if (pop.labels[model_index][i] == truth[i]) continue;
    bool others_right = true;
    for (std::size_t m = 0; m < pop.model_count() && others_right; ++m)
      if (m != model_index && pop.labels[m][i] != truth[i]) others_right = false;
    if (others_right) out.push_back(i);
  }
  return out;
}

IndexSet find_transferable(const IndexSet& unique, const std::vector<int>& protected_preds,
                           const std::vector<int>& extracted_preds, const std::vector<int>& truth) {
  if (protected_preds.size() != truth.size() || extracted_preds.size() != truth.size())
    throw InputError("prediction vectors differ in length");
  IndexSet out;
  for (auto i : unique) {
    if (i >= truth.size()) throw InputError("unique index out of range");
    if (extracted_preds[i] == protected_preds[i] && protected_preds[i] != truth[i]) out.push_back(i);
  }
  return out;
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::none: return "none";
    case Strategy::unique: return "unique";
    case Strategy::disagreements: return "disagreements";
    case Strategy::entire_set: return "entire_set";
  }
  return "";
}

Strategy parse_strategy(std::string_view s) {
  for (auto k : {Strategy::none, Strategy::unique, Strategy::disagreements, Strategy::entire_set})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown strategy '" + std::string(s) + "'");
}

SubsetReport run_strategy_analysis(std::span<const Model> protected_models,
                                   std::span<const Model> extracted_models, const Dataset& eval,
                                   Strategy strategy, const BimConfig& bim_cfg) {
  if (protected_models.size() < 2) throw InputError("strategy analysis needs at least two protected models");
  if (extracted_models.size() != protected_models.size())
    throw InputError("need exactly one extracted model per protected model");
  eval.check();

  const auto clean = PopulationPredictions::of(protected_models, eval.features, eval.labels);
  const IndexSet clean_disagreements = find_disagreements(clean);
  const std::size_t models = protected_models.size();

  // Model k sees its own copy of the evaluation set, perturbed toward k's
  // clean predictions on the rows the strategy selects.
  std::vector<Matrix> views(models, eval.features);
  PopulationPredictions pop = clean;
  if (strategy != Strategy::none) {
    for (std::size_t k = 0; k < models; ++k) {
      IndexSet targets;
      switch (strategy) {
        case Strategy::none: break;
        case Strategy::unique: targets = find_unique_disagreements(clean, k, eval.labels); break;
        case Strategy::disagreements: targets = clean_disagreements; break;
        case Strategy::entire_set:
          targets.resize(static_cast<std::size_t>(eval.size()));
          for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = i;
          break;
      }
      for (auto i : targets) {
        const auto row = static_cast<Eigen::Index>(i);
        views[k].row(row) =
            bim(protected_models[k], views[k].row(row).transpose(), clean.labels[k][i], bim_cfg).transpose();
      }
      pop.confidences[k] = forward(protected_models[k], views[k]);
      pop.labels[k] = argmax_rows(pop.confidences[k]);
    }
  }

  const double n = static_cast<double>(eval.size());
  SubsetReport report;
  report.strategy = strategy;
  report.eval_size = static_cast<std::size_t>(eval.size());
  report.disagreement_share = static_cast<double>(find_disagreements(pop).size()) / n;
  double confidence_sum = 0.0;
  for (std::size_t m = 0; m < models; ++m) {
    const auto unique = find_unique_disagreements(pop, m, eval.labels);
    const Matrix ext_conf = forward(extracted_models[m], views[m]);
    const auto ext_pred = argmax_rows(ext_conf);
    const auto transferable = find_transferable(unique, pop.labels[m], ext_pred, eval.labels);

    report.unique_share += static_cast<double>(unique.size()) / n;
    report.transferable_share += static_cast<double>(transferable.size()) / n;
    for (auto i : transferable) {
      const auto row = static_cast<Eigen::Index>(i);
      const int cls = pop.labels[m][i];
      confidence_sum += 0.5 * (pop.confidences[m](row, cls) + ext_conf(row, cls));
    }
    report.transferable_points += transferable.size();
  }
  report.unique_share /= static_cast<double>(models);
  report.transferable_share /= static_cast<double>(models);
  if (report.transferable_points > 0)
    report.mean_transferable_confidence = confidence_sum / static_cast<double>(report.transferable_points);
  return report;
}

ConfidenceShift bim_confidence_shift(std::span<const Model> models, const Matrix& inputs,
                                     const IndexSet& rows, const BimConfig& bim_cfg) {
  ConfidenceShift shift;
  for (const auto& model : models) {
    for (auto i : rows) {
      const auto row = static_cast<Eigen::Index>(i);
      const Matrix x = inputs.row(row);
      const RowVector before = forward(model, x).row(0);
      const int cls = argmax_rows(before)[0];
      const Vector adv = bim(model, x.row(0).transpose(), cls, bim_cfg);
      shift.before += before(cls);
      shift.after += forward(model, Matrix(adv.transpose()))(0, cls);
      ++shift.points;
    }
  }
  if (shift.points > 0) {
    shift.before /= static_cast<double>(shift.points);
    shift.after /= static_cast<double>(shift.points);
  }
  return shift;
}

std::string subset_table_csv(std::span<const SubsetReport> rows) {
  std::ostringstream out;
  out << "strategy,disagreements,unique,transferable,confidence\n";
  for (const auto& r : rows)
    out << to_string(r.strategy) << ',' << io::decimal(r.disagreement_share) << ','
        << io::decimal(r.unique_share) << ',' << io::decimal(r.transferable_share) << ','
        << io::decimal(r.mean_transferable_confidence) << '\n';
  return out.str();
}

}  // namespace raw
