#pragma once

#include "raw/data.hpp"
#include "raw/nnet.hpp"

#include <optional>
#include <vector>

namespace raw {

enum class BimMode { targeted, untargeted };

struct BimConfig {
  int iterations = 20;
  double epsilon = 0.3;               // L-infinity budget around the start point
  std::optional<double> step_size;    // defaults to epsilon / iterations
  double clip_lo = kFeatureMin;
  double clip_hi = kFeatureMax;
  BimMode mode = BimMode::targeted;

  double step() const;
  void validate() const;
};

/// Basic Iterative Method. Targeted mode descends the cross-entropy toward
/// `label`; untargeted mode ascends the cross-entropy of `label`. Each
/// iterate is projected onto the intersection of the epsilon-ball around
/// `input` and the clip range.
Vector bim(const Model& model, const Vector& input, int label, const BimConfig& cfg);

/// Row-wise bim; row i is attacked toward labels[i].
Matrix bim_batch(const Model& model, const Matrix& inputs, const std::vector<int>& labels,
                 const BimConfig& cfg);

}  // namespace raw
