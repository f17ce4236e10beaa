#pragma once

#include "raw/attacks.hpp"
#include "raw/data.hpp"
#include "raw/io.hpp"
#include "raw/nnet.hpp"
#include "raw/roc.hpp"
#include "raw/watermark.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace raw {

/// An extraction attack optionally followed by a blurring step, written
/// as "RET" or "WP(RET)".
struct AttackSpec {
  AttackKind extraction = AttackKind::retraining;
  std::optional<BlurConfig::Method> blur;

  std::string name() const;
  static AttackSpec parse(std::string_view text);
  friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

struct PopulationSizes {
  std::size_t extracted = 10;
  std::size_t nonextracted = 10;
};

/// Every knob of the evaluation. Defaults are the desk-scale setup:
/// 10+10 training models, 6+6 test models, 5 repetitions. The
/// (30+30, 15+15, 20) setup is reachable through the same fields.
struct EvaluationConfig {
  std::uint64_t master_seed = 20230;
  GenSpec data;
  double test_fraction = 0.5;

  std::map<std::string, FamilyDef> families = {
      {"A", default_family('A')}, {"B", default_family('B')}, {"C", default_family('C')}};
  std::string protected_family = "A";
  std::vector<std::string> nonextracted_families = {"A", "B", "C"};
  std::string cross_arch_family = "C";

  PopulationSizes train_population{10, 10};
  PopulationSizes test_population{6, 6};
  std::vector<AttackSpec> seen = {{AttackKind::transfer_learning, {}}, {AttackKind::distillation, {}}};
  std::vector<AttackSpec> unseen = {{AttackKind::retraining, {}}};
  /// Permits seen/unseen overlap (sanity runs); off for robustness runs.
  bool allow_attack_overlap = false;
  int repetitions = 5;

  ClassifierKind classifier = ClassifierKind::logistic_regression;
  KeySetConfig keyset;
  /// Which split feeds key-set generation: "test" (held out) or "train".
  std::string keygen_split = "test";

  TrainConfig train;  // per-model seeds are derived, train.seed is ignored
  double query_budget_fraction = 0.5;
  double distill_temperature = 1.0;
  std::size_t frozen_layers = 1;
  double copycat_probe_factor = 20.0;  // probes per training row
  double prune_sparsity = 0.5;
  int quant_bits = 8;

  unsigned threads = 0;  // 0 = hardware concurrency

  void validate() const;
  io::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static EvaluationConfig from_json(const io::json& j);
  std::string digest() const;

  ModelSpec spec_for(const std::string& family) const;
};

/// Datasets shared by every repetition, derived from the master seed.
struct Environment {
  Dataset train;
  Dataset test;
  Dataset pretrain;  // independent draw used to pretrain transfer-learning sources

  const Dataset& keygen_data(const EvaluationConfig& cfg) const;
};

Environment make_environment(const EvaluationConfig& cfg);

Model train_fresh(const EvaluationConfig& cfg, const Environment& env, const std::string& family,
                  std::uint64_t seed, std::string id);

ExtractionConfig extraction_config(const EvaluationConfig& cfg, AttackKind kind, std::uint64_t seed);

/// Runs `attack` against `victim` using the environment's attacker data.
Model make_extracted(const EvaluationConfig& cfg, const Environment& env, const Model& victim,
                     const AttackSpec& attack, std::uint64_t seed, std::string id);

/// blur(extract(victim)); lineage records both stages.
Model informed_attack_pipeline(const Model& victim, const Matrix& attacker_inputs,
                               const ExtractionConfig& extraction, const BlurConfig& blurring,
                               const Model* pretrained = nullptr);

struct ConfidenceDump {
  std::vector<int> labels;
  std::vector<std::string> extracted_ids;
  std::vector<std::string> nonextracted_ids;
  Matrix extracted;     // models x watermarks
  Matrix nonextracted;  // models x watermarks
};

ConfidenceDump make_confidence_dump(std::span<const Model> extracted, std::span<const Model> nonextracted,
                                    const KeySet& keyset);

struct ScoredModel {
  int repetition = 0;
  std::string id;
  std::string attack;  // attack name for extracted models, family for the rest
  bool extracted = false;
  double score = 0.0;
};

struct RepetitionSummary {
  int repetition = 0;
  std::string protected_id;
  double protected_accuracy = 0.0;
  std::size_t candidates = 0;
  double protected_self_score = 0.0;
  RocCurve roc;
  KeySet keyset;
  ConfidenceDump dump;
};

struct EvaluationReport {
  std::string config_digest;
  std::vector<ScoredModel> scores;  // sorted by (repetition, id)
  RocCurve roc;                     // pooled over repetitions
  std::vector<RepetitionSummary> repetitions;
  double mean_extracted_score = 0.0;
  double mean_nonextracted_score = 0.0;
  int repetitions_above_chance = 0;  // per-repetition AUC > 0.5
  double sign_test_p = 1.0;
};

/// Full evaluation: per repetition a fresh protected model, seen-attack and
/// multi-family training populations, key-set + verifier, then an
/// unseen-attack test population scored by the verifier.
EvaluationReport run_raw_evaluation(const EvaluationConfig& cfg);

std::string scores_csv(const EvaluationReport& report);
std::string summary_csv(const EvaluationReport& report);
/// watermark,label,mean_extracted,mean_nonextracted,<one column per model>
std::string confidence_dump_csv(const ConfidenceDump& dump);

/// Writes roc_<digest>.csv, summary_<digest>.csv, scores_<digest>.csv and
/// confidences_<digest>_rep<r>.csv into `dir`. Returns the written paths.
std::vector<std::string> export_report(const EvaluationReport& report, const std::string& dir);

void dump_confidences(std::span<const Model> extracted, std::span<const Model> nonextracted,
                      const KeySet& keyset, const std::string& path);

/// Evaluates f(0..n-1) on up to `threads` workers; results are index-ordered
/// and the first failure (by index) is rethrown.
template <typename F>
auto parallel_map(std::size_t n, unsigned threads, F&& f) -> std::vector<decltype(f(std::size_t{}))>;

}  // namespace raw

#include "raw/detail/parallel.hpp"
