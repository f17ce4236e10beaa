#include "raw/adversarial.hpp"

#include "raw/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace raw {

double BimConfig::step() const {
  if (step_size) return *step_size;
  return iterations > 0 ? epsilon / iterations : 0.0;
}

void BimConfig::validate() const {
  if (iterations < 0) throw ConfigError("BIM iterations must be non-negative");
  if (!(epsilon >= 0.0)) throw ConfigError("BIM epsilon must be non-negative");
  const double a = step();
  if (!(a >= 0.0) || a > epsilon) throw ConfigError("BIM step size must lie in [0, epsilon]");
  if (!(clip_lo < clip_hi)) throw ConfigError("BIM clip range is empty");
}

Vector bim(const Model& model, const Vector& input, int label, const BimConfig& cfg) {
  cfg.validate();
  if (input.size() != model.spec.input_dim())
    throw InputError("BIM input has " + std::to_string(input.size()) + " features, model expects " +
                     std::to_string(model.spec.input_dim()));
  if (label < 0 || label >= model.spec.output_classes)
    throw InputError("BIM label " + std::to_string(label) + " out of range");
  if ((input.array() < cfg.clip_lo).any() || (input.array() > cfg.clip_hi).any())
    throw InputError("BIM input lies outside the clip range");

  const Vector lo = (input.array() - cfg.epsilon).max(cfg.clip_lo);
  const Vector hi = (input.array() + cfg.epsilon).min(cfg.clip_hi);
  const double signed_step = cfg.mode == BimMode::targeted ? -cfg.step() : cfg.step();
  Vector x = input;
  for (int it = 0; it < cfg.iterations; ++it) {
    const Vector g = input_gradient(model, x, label);
    x += signed_step * g.unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
    x = x.cwiseMax(lo).cwiseMin(hi);
  }
  return x;
}

Matrix bim_batch(const Model& model, const Matrix& inputs, const std::vector<int>& labels,
                 const BimConfig& cfg) {
  if (static_cast<Eigen::Index>(labels.size()) != inputs.rows())
    throw InputError("BIM batch has " + std::to_string(inputs.rows()) + " inputs but " +
                     std::to_string(labels.size()) + " labels");
  Matrix out(inputs.rows(), inputs.cols());
  for (Eigen::Index r = 0; r < inputs.rows(); ++r)
    out.row(r) = bim(model, inputs.row(r).transpose(), labels[static_cast<std::size_t>(r)], cfg).transpose();
  return out;
}

}  // namespace raw
