#pragma once

#include "raw/nnet.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace raw {

enum class AttackKind { retraining, distillation, transfer_learning, cross_arch_retraining, copycat };

/// RET, DIS, TRL, CAR, CPY.
std::string_view abbreviation(AttackKind k);
AttackKind parse_attack_kind(std::string_view abbr);

struct ExtractionConfig {
  AttackKind kind = AttackKind::retraining;
  double query_budget_fraction = 0.5;
  ModelSpec surrogate_spec;
  TrainConfig train_cfg;                     // train_cfg.seed seeds init, queries and shuffling
  std::optional<double> distill_temperature;  // distillation only
  std::optional<std::size_t> frozen_layers;   // transfer learning only

  void validate() const;
};

/// Hard-label extraction: the surrogate is trained from a fresh init on the
/// victim's argmax labels for a sampled subset of `train_inputs`.
Model extract_retraining(const Model& victim, const Matrix& train_inputs, const ExtractionConfig& cfg);

/// Soft-label extraction on the victim's confidence vectors.
Model extract_distillation(const Model& victim, const Matrix& train_inputs,
                           const ExtractionConfig& cfg);

/// Fine-tunes a copy of `pretrained` on victim hard labels with the first
/// `frozen_layers` dense layers held fixed.
Model extract_transfer(const Model& victim, const Model& pretrained, const Matrix& train_inputs,
                       const ExtractionConfig& cfg);

/// Labels every probe with the victim's argmax and trains a fresh surrogate.
Model extract_copycat(const Model& victim, const Matrix& probe_inputs, const ExtractionConfig& cfg);

/// Dispatches on cfg.kind. `pretrained` is required for transfer learning.
Model extract(const Model& victim, const Matrix& inputs, const ExtractionConfig& cfg,
              const Model* pretrained = nullptr);

struct BlurConfig {
  enum class Method { weight_pruning, weight_quantization };
  Method method = Method::weight_pruning;
  double sparsity = 0.5;  // pruning
  int bits = 8;           // quantization

  void validate() const;
};

/// WP or WQ.
std::string_view abbreviation(BlurConfig::Method m);
BlurConfig::Method parse_blur_method(std::string_view abbr);

/// Global magnitude pruning: zeroes the floor(sparsity * count) dense-matrix
/// weights of smallest magnitude (ties by layer, then column-major position).
/// Biases are left alone.
Model blur_prune(const Model& model, double sparsity);

/// Per-layer uniform quantization of weights and biases together onto
/// 2^bits levels spanning the layer's [min, max]. Constant layers pass
/// through unchanged.
Model blur_quantize(const Model& model, int bits);

Model blur(const Model& model, const BlurConfig& cfg);

/// Level k of the 2^bits-level grid over [lo, hi]; level 2^bits - 1 is hi exactly.
double quantization_level(double lo, double hi, int bits, long k);

}  // namespace raw
