#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace raw {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

struct Dataset;

enum class Activation { relu, tanh };

struct DenseLayer {
  Eigen::Index in_dim = 0;
  Eigen::Index out_dim = 0;
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct ActivationLayer {
  Activation fn = Activation::relu;
  friend bool operator==(const ActivationLayer&, const ActivationLayer&) = default;
};

using Layer = std::variant<DenseLayer, ActivationLayer>;

/// Feed-forward topology. The last layer is a dense layer into
/// `output_classes`; softmax is implicit and not listed.
struct ModelSpec {
  std::vector<Layer> layers;
  int output_classes = 0;

  /// Throws SpecError on a dimension chain break, a missing output layer,
  /// or fewer than two classes.
  void validate() const;

  Eigen::Index input_dim() const;
  std::size_t dense_count() const;
  std::vector<DenseLayer> dense_layers() const;

  /// `in -> hidden[0] -> act -> ... -> hidden.back() -> act -> classes`.
  static ModelSpec mlp(Eigen::Index in_dim, const std::vector<Eigen::Index>& hidden,
                       Activation act, int classes);

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

// Named topology families used to build populations.
//   A: 2 x 64 relu   (the protected model's family)
//   B: 3 x 48 relu   (same architecture, different structure)
//   C: 2 x 64 tanh   (different architecture)
struct FamilyDef {
  std::vector<Eigen::Index> hidden;
  Activation activation = Activation::relu;
  friend bool operator==(const FamilyDef&, const FamilyDef&) = default;
};

FamilyDef default_family(char name);
ModelSpec family_spec(const FamilyDef& family, Eigen::Index in_dim, int classes);

struct LineageStep {
  enum class Kind { trained_fresh, extracted, blurred };
  Kind kind = Kind::trained_fresh;
  std::string method;  // attack or blur abbreviation, empty for trained_fresh
  std::string ref_id;  // victim id (extracted) or parent id (blurred)
  friend bool operator==(const LineageStep&, const LineageStep&) = default;
};

struct Provenance {
  std::string id;
  std::uint64_t seed = 0;
  std::vector<LineageStep> lineage;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Dense layer parameters; `weight` is out_dim x in_dim.
struct DenseParams {
  Matrix weight;
  Vector bias;
};

struct Model {
  ModelSpec spec;
  std::vector<DenseParams> params;
  Provenance provenance;

  void check() const;  // shape and finiteness invariants
};

/// Bitwise equality of spec, weights and provenance.
bool identical(const Model& a, const Model& b);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};
struct SgdParams {};

struct LossConfig {
  bool soft_labels = false;
  double temperature = 1.0;  // applied to the model's logits on the soft path
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 5e-3;
  std::variant<AdamParams, SgdParams> optimizer = AdamParams{};
  std::uint64_t seed = 0;
  LossConfig loss;

  void validate() const;
};

/// Hard class labels, or one soft target distribution per row.
using Targets = std::variant<std::vector<int>, Matrix>;

// Row-wise numerics, usable on any Eigen dense expression.

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> softmax_rows(
    const Eigen::MatrixBase<Derived>& logits) {
  using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  M out = logits.colwise() - logits.rowwise().maxCoeff();
  out = out.array().exp();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> log_softmax_rows(
    const Eigen::MatrixBase<Derived>& logits) {
  using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  M shifted = logits.colwise() - logits.rowwise().maxCoeff();
  const auto lse = shifted.array().exp().rowwise().sum().log().matrix().eval();
  shifted.colwise() -= lse;
  return shifted;
}

/// Index of the largest entry per row; ties go to the lowest index.
template <typename Derived>
std::vector<int> argmax_rows(const Eigen::MatrixBase<Derived>& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < m.cols(); ++c)
      if (m(r, c) > m(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

Model init_model(const ModelSpec& spec, std::uint64_t seed);

Matrix logits(const Model& model, const Matrix& inputs);
Matrix forward(const Model& model, const Matrix& inputs);
std::vector<int> predict(const Model& model, const Matrix& inputs);

/// Fraction of rows on which two models predict the same class.
double agreement(const Model& a, const Model& b, const Matrix& inputs);
double accuracy(const Model& model, const Matrix& inputs, const std::vector<int>& labels);

struct LossAndGrads {
  double loss = 0.0;
  std::vector<DenseParams> grads;
};

/// Mean cross-entropy over the batch and its exact parameter gradients.
LossAndGrads loss_and_param_grads(const Model& model, const Matrix& inputs,
                                  const Targets& targets, const LossConfig& loss = {});

/// Gradient of the hard-label cross-entropy with respect to one input.
Vector input_gradient(const Model& model, const Vector& input, int target_label);

struct TrainOptions {
  /// Leading dense layers whose parameters are left untouched.
  std::size_t frozen_dense_layers = 0;
};

Model train(const Model& model, const Matrix& inputs, const Targets& targets,
            const TrainConfig& cfg, const TrainOptions& options = {});
Model train(const Model& model, const Dataset& data, const TrainConfig& cfg);

inline constexpr int kModelFormatVersion = 1;

std::string save_model(const Model& model);
Model load_model(std::string_view artifact);

}  // namespace raw
