#pragma once

#include "raw/adversarial.hpp"
#include "raw/data.hpp"
#include "raw/nnet.hpp"

#include <span>
#include <string>
#include <vector>

namespace raw {

/// Sorted row indices into an evaluation set.
using IndexSet = std::vector<std::size_t>;

struct PopulationPredictions {
  std::vector<std::vector<int>> labels;  // [model][row]
  std::vector<Matrix> confidences;       // [model] rows x classes
  std::vector<int> truth;

  std::size_t model_count() const { return labels.size(); }
  std::size_t row_count() const { return truth.size(); }
  void check() const;

  static PopulationPredictions of(std::span<const Model> models, const Matrix& inputs,
                                  const std::vector<int>& truth);
};

/// Rows on which not every model predicts the same class.
IndexSet find_disagreements(const PopulationPredictions& pop);

/// Rows that `model_index` gets wrong while every other model is right.
IndexSet find_unique_disagreements(const PopulationPredictions& pop, std::size_t model_index,
                                   const std::vector<int>& truth);

/// Members of `unique` where the extracted model repeats the protected
/// model's misclassification.
IndexSet find_transferable(const IndexSet& unique, const std::vector<int>& protected_preds,
                           const std::vector<int>& extracted_preds, const std::vector<int>& truth);

enum class Strategy { none, unique, disagreements, entire_set };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);

struct SubsetReport {
  Strategy strategy = Strategy::none;
  double disagreement_share = 0.0;
  double unique_share = 0.0;        // mean over protected models
  double transferable_share = 0.0;  // mean over protected models
  double mean_transferable_confidence = 0.0;
  std::size_t transferable_points = 0;
  std::size_t eval_size = 0;
};

/// Population subset analysis with BIM applied per strategy.
///
/// Every population model k is evaluated on its own copy of the evaluation
/// set in which the rows selected by the strategy (k's unique disagreements,
/// the population disagreements, or every row) are BIM-perturbed toward k's
/// clean prediction. Subsets are recomputed on those predictions; model m's
/// extracted partner is evaluated on m's copy. The disagreement share is the
/// population value, unique and transferable shares are means over models,
/// and the transferable confidence is the mean, over all transferable
/// points, of the protected and extracted probabilities for their shared
/// predicted class.
SubsetReport run_strategy_analysis(std::span<const Model> protected_models,
                                   std::span<const Model> extracted_models, const Dataset& eval,
                                   Strategy strategy, const BimConfig& bim_cfg);

struct ConfidenceShift {
  double before = 0.0;
  double after = 0.0;
  std::size_t points = 0;
};

/// Mean predicted-class confidence of each model over `rows`, before and
/// after targeting BIM at that model's own prediction.
ConfidenceShift bim_confidence_shift(std::span<const Model> models, const Matrix& inputs,
                                     const IndexSet& rows, const BimConfig& bim_cfg);

/// strategy,disagreements,unique,transferable,confidence
std::string subset_table_csv(std::span<const SubsetReport> rows);

}  // namespace raw
