#pragma once

#include "raw/adversarial.hpp"
#include "raw/data.hpp"
#include "raw/nnet.hpp"

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace raw {

// ---------------------------------------------------------------- key-set

/// Where watermark candidates come from before BIM.
enum class CandidateSource {
  misclassifications,  // rows the protected model gets wrong
  disagreements,       // rows where the protected and non-extracted models do not all agree
};

std::string_view to_string(CandidateSource s);
CandidateSource parse_candidate_source(std::string_view s);

inline constexpr double kKeySetEpsilon = 0.05;

struct KeySetConfig {
  std::size_t size = 32;
  BimConfig bim = [] {
    BimConfig b;
    b.epsilon = kKeySetEpsilon;
    return b;
  }();
  CandidateSource source = CandidateSource::misclassifications;
};

struct KeySet {
  Matrix watermarks;                        // n x D, post-BIM inputs
  std::vector<int> labels;                  // protected model's argmax on each watermark
  std::vector<std::size_t> source_indices;  // row of the originating input in the key-gen data
  std::string protected_id;
  std::string config_digest;

  std::size_t size() const { return labels.size(); }
  void check() const;
};

/// Positions of the n largest |conf_e[i] - conf_ne[i]|, largest first; equal
/// gaps are ordered by ascending position.
std::vector<std::size_t> select_top_by_gap(std::span<const double> conf_extracted,
                                           std::span<const double> conf_nonextracted, std::size_t n);

/// Surviving BIM-perturbed candidates (steps 1-5 below), in ascending
/// source-row order.
struct WatermarkCandidates {
  Matrix inputs;
  std::vector<int> labels;
  std::vector<std::size_t> source_indices;
  std::vector<double> conf_extracted;     // mean over the extracted population
  std::vector<double> conf_nonextracted;  // mean over the non-extracted population

  std::size_t size() const { return labels.size(); }
};

WatermarkCandidates collect_candidates(const Model& protected_model, std::span<const Model> extracted,
                                       std::span<const Model> nonextracted, const Dataset& data,
                                       const KeySetConfig& cfg);

/// Offline key-set generation.
///   1. classify `data` with the protected model;
///   2. keep the misclassified rows (or population disagreements, per cfg);
///   3. BIM each toward the protected model's prediction;
///   4. drop rows whose perturbed argmax is the true label, relabel the rest
///      with the protected model's argmax on the perturbed input;
///   5. average each population's probability for that label;
///   6. keep the cfg.size rows with the widest extracted/non-extracted gap.
/// Throws NoWatermarkMaterial when step 4 leaves nothing and InputError when
/// fewer than cfg.size candidates survive.
KeySet generate_keyset(const Model& protected_model, std::span<const Model> extracted,
                       std::span<const Model> nonextracted, const Dataset& data,
                       const KeySetConfig& cfg);

/// Entry i: the model's probability for keyset.labels[i] on watermark i.
Vector confidence_profile(const Model& model, const KeySet& keyset);

/// Row m: confidence_profile(models[m], keyset).
Matrix confidence_table(std::span<const Model> models, const KeySet& keyset);

// ---------------------------------------------------------------- classifiers

/// p(extracted | x) = sigmoid(weight * x + bias).
struct LogisticRegression {
  double weight = 0.0;
  double bias = 0.0;
};

/// Gaussian class-conditionals over the scalar confidence; index 1 is
/// "extracted", index 0 "not extracted".
struct GaussianNb {
  double mean[2] = {0.0, 0.0};
  double variance[2] = {1.0, 1.0};
  double prior[2] = {0.5, 0.5};
};

struct WatermarkClassifier {
  std::variant<LogisticRegression, GaussianNb> model;

  double probability_extracted(double confidence) const;
  /// True when p(extracted | confidence) >= 0.5.
  bool is_extracted(double confidence) const;
};

enum class ClassifierKind { logistic_regression, gaussian_nb };

std::string_view to_string(ClassifierKind k);
ClassifierKind parse_classifier_kind(std::string_view s);

struct LrOptions {
  double l2 = 1e-4;
  double gradient_tolerance = 1e-8;
  int max_iterations = 500;
};

/// L2-regularised (weight only) logistic regression on one scalar feature,
/// minimising mean log-loss + l2/2 * weight^2 by damped Newton steps until
/// the gradient norm falls below the tolerance.
WatermarkClassifier fit_lr(std::span<const double> extracted, std::span<const double> nonextracted,
                           const LrOptions& options = {});

inline constexpr double kGnbVarianceFloor = 1e-9;

/// Per-class mean and (population) variance floored at `variance_floor`,
/// priors from class frequencies.
WatermarkClassifier fit_gnb(std::span<const double> extracted, std::span<const double> nonextracted,
                            double variance_floor = kGnbVarianceFloor);

// ---------------------------------------------------------------- verification

struct VerificationModel {
  std::vector<WatermarkClassifier> classifiers;  // index-aligned with the key-set
  std::size_t size() const { return classifiers.size(); }
};

VerificationModel build_verifier(std::span<const Model> extracted, std::span<const Model> nonextracted,
                                 const KeySet& keyset, ClassifierKind kind);

/// Same, from precomputed confidence tables (rows = models, cols = watermarks).
VerificationModel build_verifier(const Matrix& extracted_conf, const Matrix& nonextracted_conf,
                                 ClassifierKind kind);

struct Verdict {
  double score = 0.0;          // extracted decisions / n
  std::vector<bool> extracted;  // per-watermark decision
};

Verdict verify(const Model& suspect, const VerificationModel& verifier, const KeySet& keyset);
Verdict verify_profile(const Vector& profile, const VerificationModel& verifier);

inline constexpr int kKeySetFormatVersion = 1;
inline constexpr int kVerifierFormatVersion = 1;

std::string save_keyset(const KeySet& keyset);
KeySet load_keyset(std::string_view text);
std::string save_verifier(const VerificationModel& verifier);
VerificationModel load_verifier(std::string_view text);

}  // namespace raw
