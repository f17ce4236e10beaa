#include "raw/nnet.hpp"

#include "raw/data.hpp"
#include "raw/error.hpp"
#include "raw/io.hpp"
#include "raw/rng.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <string>

namespace raw {

namespace {

std::string dims_str(Eigen::Index a, Eigen::Index b) {
  return std::to_string(a) + "x" + std::to_string(b);
}

}  // namespace

// ---------------------------------------------------------------- spec

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw SpecError("unknown activation '" + std::string(s) + "'");
}

void ModelSpec::validate() const {
  if (output_classes < 2) throw SpecError("output_classes must be >= 2");
  Eigen::Index prev_out = -1;
  std::size_t dense = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (const auto* d = std::get_if<DenseLayer>(&layers[i])) {
      if (d->in_dim <= 0 || d->out_dim <= 0)
        throw SpecError("layer " + std::to_string(i) + ": non-positive dense dimension");
      if (prev_out >= 0 && d->in_dim != prev_out)
        throw SpecError("layer " + std::to_string(i) + ": dense(" + dims_str(d->in_dim, d->out_dim) +
                        ") does not chain from previous out_dim " + std::to_string(prev_out));
      prev_out = d->out_dim;
      ++dense;
    }
  }
  if (dense == 0) throw SpecError("spec has no dense layer");
  if (!std::holds_alternative<DenseLayer>(layers.back()))
    throw SpecError("final layer must be dense");
  if (prev_out != output_classes)
    throw SpecError("final dense out_dim " + std::to_string(prev_out) +
                    " != output_classes " + std::to_string(output_classes));
}

Eigen::Index ModelSpec::input_dim() const {
  for (const auto& l : layers)
    if (const auto* d = std::get_if<DenseLayer>(&l)) return d->in_dim;
  return 0;
}

std::size_t ModelSpec::dense_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += std::holds_alternative<DenseLayer>(l) ? 1 : 0;
  return n;
}

std::vector<DenseLayer> ModelSpec::dense_layers() const {
  std::vector<DenseLayer> out;
  for (const auto& l : layers)
    if (const auto* d = std::get_if<DenseLayer>(&l)) out.push_back(*d);
  return out;
}

ModelSpec ModelSpec::mlp(Eigen::Index in_dim, const std::vector<Eigen::Index>& hidden,
                         Activation act, int classes) {
  ModelSpec s;
  Eigen::Index prev = in_dim;
  for (auto h : hidden) {
    s.layers.emplace_back(DenseLayer{prev, h});
    s.layers.emplace_back(ActivationLayer{act});
    prev = h;
  }
  s.layers.emplace_back(DenseLayer{prev, classes});
  s.output_classes = classes;
  s.validate();
  return s;
}

FamilyDef default_family(char name) {
  switch (name) {
    case 'A': return {{64, 64}, Activation::relu};
    case 'B': return {{48, 48, 48}, Activation::relu};
    case 'C': return {{64, 64}, Activation::tanh};
    default: throw SpecError(std::string("unknown model family '") + name + "'");
  }
}

ModelSpec family_spec(const FamilyDef& family, Eigen::Index in_dim, int classes) {
  return ModelSpec::mlp(in_dim, family.hidden, family.activation, classes);
}

// ---------------------------------------------------------------- model

void Model::check() const {
  spec.validate();
  const auto dense = spec.dense_layers();
  if (params.size() != dense.size())
    throw SpecError("model has " + std::to_string(params.size()) + " parameter blocks, spec has " +
                    std::to_string(dense.size()) + " dense layers");
  for (std::size_t i = 0; i < dense.size(); ++i) {
    const auto& p = params[i];
    if (p.weight.rows() != dense[i].out_dim || p.weight.cols() != dense[i].in_dim ||
        p.bias.size() != dense[i].out_dim)
      throw SpecError("dense layer " + std::to_string(i) + ": weight shape " +
                      dims_str(p.weight.rows(), p.weight.cols()) + " does not match spec " +
                      dims_str(dense[i].out_dim, dense[i].in_dim));
    if (!p.weight.allFinite() || !p.bias.allFinite())
      throw SpecError("dense layer " + std::to_string(i) + " has non-finite parameters");
  }
}

namespace {

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}
bool bit_equal(const Vector& a, const Vector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

bool identical(const Model& a, const Model& b) {
  if (!(a.spec == b.spec) || !(a.provenance == b.provenance) || a.params.size() != b.params.size())
    return false;
  for (std::size_t i = 0; i < a.params.size(); ++i)
    if (!bit_equal(a.params[i].weight, b.params[i].weight) ||
        !bit_equal(a.params[i].bias, b.params[i].bias))
      return false;
  return true;
}

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be a finite non-negative number");
  if (loss.soft_labels && !(loss.temperature > 0.0))
    throw ConfigError("temperature must be > 0 for soft-label loss");
}

// Glorot-uniform weights, zero biases.
Model init_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed, "init");
  Model m;
  m.spec = spec;
  for (const auto& d : spec.dense_layers()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(d.in_dim + d.out_dim));
    DenseParams p{Matrix(d.out_dim, d.in_dim), Vector::Zero(d.out_dim)};
    for (Eigen::Index r = 0; r < p.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < p.weight.cols(); ++c) p.weight(r, c) = rng.uniform(-limit, limit);
    m.params.push_back(std::move(p));
  }
  m.provenance.seed = seed;
  m.provenance.lineage = {LineageStep{LineageStep::Kind::trained_fresh, "", ""}};
  return m;
}

// ---------------------------------------------------------------- forward / backward

namespace {

// Activations of every layer boundary: acts[0] is the input, acts[i+1] the
// output of spec.layers[i].
std::vector<Matrix> forward_trace(const Model& model, const Matrix& inputs) {
  if (inputs.cols() != model.spec.input_dim())
    throw InputError("input has " + std::to_string(inputs.cols()) + " features, model expects " +
                     std::to_string(model.spec.input_dim()));
  std::vector<Matrix> acts;
  acts.reserve(model.spec.layers.size() + 1);
  acts.push_back(inputs);
  std::size_t dense = 0;
  for (const auto& layer : model.spec.layers) {
    const Matrix& a = acts.back();
    if (std::holds_alternative<DenseLayer>(layer)) {
      const auto& p = model.params[dense++];
      Matrix z = a * p.weight.transpose();
      z.rowwise() += p.bias.transpose();
      acts.push_back(std::move(z));
    } else if (std::get<ActivationLayer>(layer).fn == Activation::relu) {
      acts.push_back(a.cwiseMax(0.0));
    } else {
      acts.push_back(a.array().tanh().matrix());
    }
  }
  return acts;
}

// Backpropagates `delta` (gradient w.r.t. the final logits) through the
// network. Fills parameter gradients when `grads` is non-null and returns
// the gradient w.r.t. the input.
Matrix backward(const Model& model, const std::vector<Matrix>& acts, Matrix delta,
                std::vector<DenseParams>* grads) {
  std::size_t dense = model.params.size();
  for (std::size_t li = model.spec.layers.size(); li-- > 0;) {
    const auto& layer = model.spec.layers[li];
    const Matrix& in = acts[li];
    if (std::holds_alternative<DenseLayer>(layer)) {
      const auto& p = model.params[--dense];
      if (grads) {
        (*grads)[dense].weight = delta.transpose() * in;
        (*grads)[dense].bias = delta.colwise().sum().transpose();
      }
      delta = delta * p.weight;
    } else if (std::get<ActivationLayer>(layer).fn == Activation::relu) {
      delta = (in.array() > 0.0).select(delta, 0.0);
    } else {
      const Matrix& out = acts[li + 1];
      delta.array() *= 1.0 - out.array().square();
    }
  }
  return delta;
}

Matrix one_hot(const std::vector<int>& labels, int classes) {
  Matrix t = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes)
      throw InputError("label " + std::to_string(labels[i]) + " outside [0, " +
                       std::to_string(classes) + ")");
    t(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return t;
}

Matrix target_matrix(const Targets& targets, Eigen::Index rows, int classes) {
  Matrix t;
  if (const auto* hard = std::get_if<std::vector<int>>(&targets)) {
    t = one_hot(*hard, classes);
  } else {
    t = std::get<Matrix>(targets);
    if (t.cols() != classes)
      throw InputError("soft targets have " + std::to_string(t.cols()) + " columns, model has " +
                       std::to_string(classes) + " classes");
  }
  if (t.rows() != rows)
    throw InputError("target count " + std::to_string(t.rows()) + " != batch size " +
                     std::to_string(rows));
  return t;
}

// Cross-entropy of softmax(logits / T) against `t`; writes dL/dlogits.
double cross_entropy(const Matrix& z, const Matrix& t, double temperature, Matrix& dz) {
  const double n = static_cast<double>(z.rows());
  const Matrix scaled = z / temperature;
  const Matrix logp = log_softmax_rows(scaled);
  // 0 * log(0) contributes nothing even when logp underflows to -inf.
  const double loss = -(t.array() * logp.array()).unaryExpr([](double v) {
    return std::isnan(v) ? 0.0 : v;
  }).sum() / n;
  dz = (logp.array().exp().matrix() - t) / (temperature * n);
  return loss;
}

}  // namespace

Matrix logits(const Model& model, const Matrix& inputs) {
  return std::move(forward_trace(model, inputs).back());
}

Matrix forward(const Model& model, const Matrix& inputs) {
  return softmax_rows(logits(model, inputs));
}

std::vector<int> predict(const Model& model, const Matrix& inputs) {
  return argmax_rows(forward(model, inputs));
}

double agreement(const Model& a, const Model& b, const Matrix& inputs) {
  const auto pa = predict(a, inputs);
  const auto pb = predict(b, inputs);
  std::size_t same = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) same += pa[i] == pb[i] ? 1 : 0;
  return pa.empty() ? 0.0 : static_cast<double>(same) / static_cast<double>(pa.size());
}

double accuracy(const Model& model, const Matrix& inputs, const std::vector<int>& labels) {
  const auto p = predict(model, inputs);
  if (p.size() != labels.size()) throw InputError("label count does not match input rows");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ok += p[i] == labels[i] ? 1 : 0;
  return p.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(p.size());
}

LossAndGrads loss_and_param_grads(const Model& model, const Matrix& inputs, const Targets& targets,
                                  const LossConfig& loss) {
  if (inputs.rows() == 0) throw InputError("empty batch");
  const double temperature = loss.soft_labels ? loss.temperature : 1.0;
  if (!(temperature > 0.0)) throw InputError("temperature must be positive");
  const auto acts = forward_trace(model, inputs);
  const Matrix t = target_matrix(targets, inputs.rows(), model.spec.output_classes);
  Matrix dz;
  LossAndGrads out;
  out.loss = cross_entropy(acts.back(), t, temperature, dz);
  out.grads.resize(model.params.size());
  backward(model, acts, std::move(dz), &out.grads);
  return out;
}

Vector input_gradient(const Model& model, const Vector& input, int target_label) {
  const Matrix x = input.transpose();
  const auto acts = forward_trace(model, x);
  Matrix dz;
  cross_entropy(acts.back(), one_hot({target_label}, model.spec.output_classes), 1.0, dz);
  return backward(model, acts, std::move(dz), nullptr).transpose();
}

// ---------------------------------------------------------------- training

namespace {

struct AdamState {
  std::vector<DenseParams> m, v;
  long step = 0;
};

std::vector<DenseParams> zeros_like(const std::vector<DenseParams>& ps) {
  std::vector<DenseParams> out;
  for (const auto& p : ps)
    out.push_back({Matrix::Zero(p.weight.rows(), p.weight.cols()), Vector::Zero(p.bias.size())});
  return out;
}

template <typename T>
void adam_update(T& param, T& m, T& v, const T& g, const AdamParams& a, double lr, double c1,
                 double c2) {
  m = a.beta1 * m + (1.0 - a.beta1) * g;
  v = a.beta2 * v + (1.0 - a.beta2) * g.cwiseAbs2();
  param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + a.eps);
}

}  // namespace

Model train(const Model& model, const Matrix& inputs, const Targets& targets,
            const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  model.check();
  if (inputs.rows() == 0) throw InputError("cannot train on an empty dataset");
  if (inputs.cols() != model.spec.input_dim())
    throw InputError("training inputs have " + std::to_string(inputs.cols()) +
                     " features, model expects " + std::to_string(model.spec.input_dim()));
  const Matrix all_targets = target_matrix(targets, inputs.rows(), model.spec.output_classes);
  if (options.frozen_dense_layers > model.params.size())
    throw InputError("cannot freeze more layers than the model has");

  Model out = model;
  AdamState adam{zeros_like(out.params), zeros_like(out.params), 0};
  Rng rng(cfg.seed, "shuffle");
  const auto n = static_cast<std::size_t>(inputs.rows());
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  LossConfig loss = cfg.loss;
  if (std::holds_alternative<std::vector<int>>(targets)) loss.soft_labels = false;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = rng.permutation(n);
    for (std::size_t start = 0, batch = 0; start < n; start += bs, ++batch) {
      const std::size_t len = std::min(bs, n - start);
      Matrix xb(static_cast<Eigen::Index>(len), inputs.cols());
      Matrix tb(static_cast<Eigen::Index>(len), all_targets.cols());
      for (std::size_t k = 0; k < len; ++k) {
        xb.row(static_cast<Eigen::Index>(k)) = inputs.row(static_cast<Eigen::Index>(order[start + k]));
        tb.row(static_cast<Eigen::Index>(k)) =
            all_targets.row(static_cast<Eigen::Index>(order[start + k]));
      }
      auto lg = loss_and_param_grads(out, xb, Targets{std::move(tb)}, loss);
      if (!std::isfinite(lg.loss))
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch));

      if (const auto* a = std::get_if<AdamParams>(&cfg.optimizer)) {
        ++adam.step;
        const double c1 = 1.0 - std::pow(a->beta1, static_cast<double>(adam.step));
        const double c2 = 1.0 - std::pow(a->beta2, static_cast<double>(adam.step));
        for (std::size_t i = options.frozen_dense_layers; i < out.params.size(); ++i) {
          adam_update(out.params[i].weight, adam.m[i].weight, adam.v[i].weight,
                      lg.grads[i].weight, *a, cfg.learning_rate, c1, c2);
          adam_update(out.params[i].bias, adam.m[i].bias, adam.v[i].bias, lg.grads[i].bias, *a,
                      cfg.learning_rate, c1, c2);
        }
      } else {
        for (std::size_t i = options.frozen_dense_layers; i < out.params.size(); ++i) {
          out.params[i].weight -= cfg.learning_rate * lg.grads[i].weight;
          out.params[i].bias -= cfg.learning_rate * lg.grads[i].bias;
        }
      }
      for (std::size_t i = options.frozen_dense_layers; i < out.params.size(); ++i)
        if (!out.params[i].weight.allFinite() || !out.params[i].bias.allFinite())
          throw DivergenceError("non-finite weights at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(batch) + " (dense layer " + std::to_string(i) + ")");
    }
  }
  return out;
}

Model train(const Model& model, const Dataset& data, const TrainConfig& cfg) {
  data.check();
  if (data.class_count != model.spec.output_classes)
    throw InputError("dataset has " + std::to_string(data.class_count) + " classes, model has " +
                     std::to_string(model.spec.output_classes));
  return train(model, data.features, Targets{data.labels}, cfg);
}

// ---------------------------------------------------------------- persistence

namespace {

using io::json;

std::string_view kind_name(LineageStep::Kind k) {
  switch (k) {
    case LineageStep::Kind::trained_fresh: return "trained_fresh";
    case LineageStep::Kind::extracted: return "extracted";
    case LineageStep::Kind::blurred: return "blurred";
  }
  return "";
}

LineageStep::Kind parse_kind(const std::string& s) {
  if (s == "trained_fresh") return LineageStep::Kind::trained_fresh;
  if (s == "extracted") return LineageStep::Kind::extracted;
  if (s == "blurred") return LineageStep::Kind::blurred;
  throw FormatError("unknown lineage kind '" + s + "'");
}

}  // namespace

std::string save_model(const Model& model) {
  model.check();
  json layers = json::array();
  for (const auto& l : model.spec.layers) {
    if (const auto* d = std::get_if<DenseLayer>(&l))
      layers.push_back({{"type", "dense"}, {"in", d->in_dim}, {"out", d->out_dim}});
    else
      layers.push_back({{"type", "activation"}, {"fn", to_string(std::get<ActivationLayer>(l).fn)}});
  }
  json lineage = json::array();
  for (const auto& s : model.provenance.lineage)
    lineage.push_back({{"kind", kind_name(s.kind)}, {"method", s.method}, {"ref", s.ref_id}});
  json weights = json::array();
  for (const auto& p : model.params)
    weights.push_back({{"weight", io::matrix_to_json(p.weight)}, {"bias", io::vector_to_json(p.bias)}});
  json j = {{"format", "raw-model"},
            {"version", kModelFormatVersion},
            {"spec", {{"layers", layers}, {"output_classes", model.spec.output_classes}}},
            {"provenance",
             {{"id", model.provenance.id},
              {"seed", std::to_string(model.provenance.seed)},
              {"lineage", lineage}}},
            {"params", weights}};
  return j.dump(1) + "\n";
}

Model load_model(std::string_view artifact) {
  const json j = io::parse_json(artifact, "model artifact");
  io::check_header(j, "raw-model", kModelFormatVersion);
  try {
    Model m;
    for (const auto& l : j.at("spec").at("layers")) {
      const auto type = l.at("type").get<std::string>();
      if (type == "dense")
        m.spec.layers.emplace_back(DenseLayer{l.at("in").get<Eigen::Index>(), l.at("out").get<Eigen::Index>()});
      else if (type == "activation")
        m.spec.layers.emplace_back(ActivationLayer{parse_activation(l.at("fn").get<std::string>())});
      else
        throw FormatError("unknown layer type '" + type + "'");
    }
    m.spec.output_classes = j.at("spec").at("output_classes").get<int>();
    const auto& prov = j.at("provenance");
    m.provenance.id = prov.at("id").get<std::string>();
    const auto seed = prov.at("seed").get<std::string>();
    auto [ptr, ec] = std::from_chars(seed.data(), seed.data() + seed.size(), m.provenance.seed);
    if (ec != std::errc{} || ptr != seed.data() + seed.size())
      throw FormatError("bad provenance seed '" + seed + "'");
    for (const auto& s : prov.at("lineage"))
      m.provenance.lineage.push_back({parse_kind(s.at("kind").get<std::string>()),
                                      s.at("method").get<std::string>(), s.at("ref").get<std::string>()});
    for (const auto& p : j.at("params"))
      m.params.push_back({io::matrix_from_json(p.at("weight")), io::vector_from_json(p.at("bias"))});
    try {
      m.check();
    } catch (const SpecError& e) {
      throw FormatError(std::string("model artifact violates its spec: ") + e.what());
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model artifact: ") + e.what());
  }
}

}  // namespace raw
