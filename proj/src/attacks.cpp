#include "raw/attacks.hpp"

#include "raw/data.hpp"
#include "raw/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace raw {

std::string_view abbreviation(AttackKind k) {
  switch (k) {
    case AttackKind::retraining: return "RET";
    case AttackKind::distillation: return "DIS";
    case AttackKind::transfer_learning: return "TRL";
    case AttackKind::cross_arch_retraining: return "CAR";
    case AttackKind::copycat: return "CPY";
  }
  return "";
}

AttackKind parse_attack_kind(std::string_view abbr) {
  for (auto k : {AttackKind::retraining, AttackKind::distillation, AttackKind::transfer_learning,
                 AttackKind::cross_arch_retraining, AttackKind::copycat})
    if (abbreviation(k) == abbr) return k;
  throw ConfigError("unknown extraction attack '" + std::string(abbr) + "'");
}

void ExtractionConfig::validate() const {
  surrogate_spec.validate();
  train_cfg.validate();
  if (!(query_budget_fraction > 0.0 && query_budget_fraction <= 1.0))
    throw ConfigError("query_budget_fraction must lie in (0, 1]");
  const bool distill = kind == AttackKind::distillation;
  const bool transfer = kind == AttackKind::transfer_learning;
  if (distill != distill_temperature.has_value())
    throw ConfigError(distill ? "distillation requires distill_temperature"
                              : "distill_temperature is only valid for distillation");
  if (distill && !(*distill_temperature > 0.0))
    throw ConfigError("distill_temperature must be > 0");
  if (transfer != frozen_layers.has_value())
    throw ConfigError(transfer ? "transfer learning requires frozen_layers"
                               : "frozen_layers is only valid for transfer learning");
}

namespace {

void require_kind(const ExtractionConfig& cfg, std::initializer_list<AttackKind> kinds) {
  if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end())
    throw ConfigError("config kind " + std::string(abbreviation(cfg.kind)) +
                      " does not match the requested attack");
}

void check_victim(const Model& victim, const ExtractionConfig& cfg, const Matrix& inputs) {
  cfg.validate();
  victim.check();
  if (cfg.surrogate_spec.input_dim() != victim.spec.input_dim() ||
      cfg.surrogate_spec.output_classes != victim.spec.output_classes)
    throw SpecError("surrogate input/output dimensions do not match the victim");
  if (inputs.cols() != victim.spec.input_dim())
    throw InputError("attack inputs have " + std::to_string(inputs.cols()) +
                     " features, victim expects " + std::to_string(victim.spec.input_dim()));
}

Matrix queries_for(const Matrix& train_inputs, const ExtractionConfig& cfg) {
  if (query_count(train_inputs.rows(), cfg.query_budget_fraction) < 1)
    throw InputError("query budget yields no queries from " + std::to_string(train_inputs.rows()) +
                     " rows");
  return sample_queries(train_inputs, cfg.query_budget_fraction, cfg.train_cfg.seed);
}

void stamp(Model& m, const Model& victim, AttackKind kind, std::uint64_t seed) {
  m.provenance.seed = seed;
  m.provenance.lineage = {LineageStep{LineageStep::Kind::extracted, std::string(abbreviation(kind)),
                                      victim.provenance.id}};
  m.provenance.id = std::string(abbreviation(kind)) + "(" + victim.provenance.id + ")#" +
                    std::to_string(seed);
}

}  // namespace

Model extract_retraining(const Model& victim, const Matrix& train_inputs,
                         const ExtractionConfig& cfg) {
  require_kind(cfg, {AttackKind::retraining, AttackKind::cross_arch_retraining});
  check_victim(victim, cfg, train_inputs);
  const Matrix queries = queries_for(train_inputs, cfg);
  const auto labels = predict(victim, queries);
  Model m = train(init_model(cfg.surrogate_spec, cfg.train_cfg.seed), queries, Targets{labels},
                  cfg.train_cfg);
  stamp(m, victim, cfg.kind, cfg.train_cfg.seed);
  return m;
}

Model extract_distillation(const Model& victim, const Matrix& train_inputs,
                           const ExtractionConfig& cfg) {
  require_kind(cfg, {AttackKind::distillation});
  check_victim(victim, cfg, train_inputs);
  const Matrix queries = queries_for(train_inputs, cfg);
  TrainConfig tc = cfg.train_cfg;
  tc.loss = LossConfig{true, *cfg.distill_temperature};
  Model m = train(init_model(cfg.surrogate_spec, tc.seed), queries, Targets{forward(victim, queries)}, tc);
  stamp(m, victim, cfg.kind, tc.seed);
  return m;
}

Model extract_transfer(const Model& victim, const Model& pretrained, const Matrix& train_inputs,
                       const ExtractionConfig& cfg) {
  require_kind(cfg, {AttackKind::transfer_learning});
  check_victim(victim, cfg, train_inputs);
  pretrained.check();
  if (!(pretrained.spec == cfg.surrogate_spec))
    throw SpecError("pretrained model spec differs from the surrogate spec");
  if (*cfg.frozen_layers >= pretrained.spec.dense_count())
    throw ConfigError("frozen_layers (" + std::to_string(*cfg.frozen_layers) +
                      ") must be smaller than the dense layer count (" +
                      std::to_string(pretrained.spec.dense_count()) + ")");
  const Matrix queries = queries_for(train_inputs, cfg);
  const auto labels = predict(victim, queries);
  Model m = train(pretrained, queries, Targets{labels}, cfg.train_cfg,
                  TrainOptions{*cfg.frozen_layers});
  stamp(m, victim, cfg.kind, cfg.train_cfg.seed);
  return m;
}

Model extract_copycat(const Model& victim, const Matrix& probe_inputs, const ExtractionConfig& cfg) {
  require_kind(cfg, {AttackKind::copycat});
  if (probe_inputs.rows() == 0) throw InputError("copycat needs at least one probe input");
  check_victim(victim, cfg, probe_inputs);
  const auto labels = predict(victim, probe_inputs);
  Model m = train(init_model(cfg.surrogate_spec, cfg.train_cfg.seed), probe_inputs, Targets{labels},
                  cfg.train_cfg);
  stamp(m, victim, cfg.kind, cfg.train_cfg.seed);
  return m;
}

Model extract(const Model& victim, const Matrix& inputs, const ExtractionConfig& cfg,
              const Model* pretrained) {
  switch (cfg.kind) {
    case AttackKind::retraining:
    case AttackKind::cross_arch_retraining: return extract_retraining(victim, inputs, cfg);
    case AttackKind::distillation: return extract_distillation(victim, inputs, cfg);
    case AttackKind::copycat: return extract_copycat(victim, inputs, cfg);
    case AttackKind::transfer_learning:
      if (!pretrained) throw ConfigError("transfer learning needs a pretrained model");
      return extract_transfer(victim, *pretrained, inputs, cfg);
  }
  throw ConfigError("unhandled attack kind");
}

// ---------------------------------------------------------------- blurring

void BlurConfig::validate() const {
  if (method == Method::weight_pruning && !(sparsity >= 0.0 && sparsity < 1.0))
    throw ConfigError("sparsity must lie in [0, 1)");
  if (method == Method::weight_quantization && (bits < 1 || bits > 16))
    throw ConfigError("quantization bits must lie in [1, 16]");
}

std::string_view abbreviation(BlurConfig::Method m) {
  return m == BlurConfig::Method::weight_pruning ? "WP" : "WQ";
}

BlurConfig::Method parse_blur_method(std::string_view abbr) {
  if (abbr == "WP") return BlurConfig::Method::weight_pruning;
  if (abbr == "WQ") return BlurConfig::Method::weight_quantization;
  throw ConfigError("unknown blurring method '" + std::string(abbr) + "'");
}

namespace {

void stamp_blur(Model& m, const Model& parent, BlurConfig::Method method) {
  m.provenance.lineage.push_back(
      LineageStep{LineageStep::Kind::blurred, std::string(abbreviation(method)), parent.provenance.id});
  m.provenance.id = std::string(abbreviation(method)) + "(" + parent.provenance.id + ")";
}

}  // namespace

Model blur_prune(const Model& model, double sparsity) {
  BlurConfig{BlurConfig::Method::weight_pruning, sparsity, 8}.validate();
  model.check();
  struct Slot {
    double magnitude;
    std::size_t layer;
    Eigen::Index index;
  };
  std::vector<Slot> slots;
  for (std::size_t l = 0; l < model.params.size(); ++l) {
    const auto& w = model.params[l].weight;
    for (Eigen::Index i = 0; i < w.size(); ++i) slots.push_back({std::abs(w.data()[i]), l, i});
  }
  const auto count = static_cast<std::size_t>(std::floor(sparsity * static_cast<double>(slots.size())));
  std::stable_sort(slots.begin(), slots.end(),
                   [](const Slot& a, const Slot& b) { return a.magnitude < b.magnitude; });
  Model out = model;
  for (std::size_t k = 0; k < count; ++k) out.params[slots[k].layer].weight.data()[slots[k].index] = 0.0;
  stamp_blur(out, model, BlurConfig::Method::weight_pruning);
  return out;
}

double quantization_level(double lo, double hi, int bits, long k) {
  const long top = (1L << bits) - 1;
  if (k >= top) return hi;
  return lo + static_cast<double>(k) * ((hi - lo) / static_cast<double>(top));
}

Model blur_quantize(const Model& model, int bits) {
  BlurConfig{BlurConfig::Method::weight_quantization, 0.5, bits}.validate();
  model.check();
  Model out = model;
  const long top = (1L << bits) - 1;
  for (auto& p : out.params) {
    const double lo = std::min(p.weight.minCoeff(), p.bias.minCoeff());
    const double hi = std::max(p.weight.maxCoeff(), p.bias.maxCoeff());
    if (!(hi > lo)) continue;
    const double step = (hi - lo) / static_cast<double>(top);
    auto snap = [&](double v) {
      const long k = std::clamp(std::lround((v - lo) / step), 0L, top);
      return quantization_level(lo, hi, bits, k);
    };
    p.weight = p.weight.unaryExpr(snap);
    p.bias = p.bias.unaryExpr(snap);
  }
  stamp_blur(out, model, BlurConfig::Method::weight_quantization);
  return out;
}

Model blur(const Model& model, const BlurConfig& cfg) {
  cfg.validate();
  return cfg.method == BlurConfig::Method::weight_pruning ? blur_prune(model, cfg.sparsity)
                                                          : blur_quantize(model, cfg.bits);
}

}  // namespace raw
