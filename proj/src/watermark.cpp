#include "raw/watermark.hpp"

#include "raw/error.hpp"
#include "raw/io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace raw {

std::string_view to_string(CandidateSource s) {
  return s == CandidateSource::misclassifications ? "misclassifications" : "disagreements";
}

CandidateSource parse_candidate_source(std::string_view s) {
  if (s == "misclassifications") return CandidateSource::misclassifications;
  if (s == "disagreements") return CandidateSource::disagreements;
  throw ConfigError("unknown candidate source '" + std::string(s) + "'");
}

void KeySet::check() const {
  if (labels.empty()) throw InputError("key-set is empty");
  if (watermarks.rows() != static_cast<Eigen::Index>(labels.size()) ||
      source_indices.size() != labels.size())
    throw InputError("key-set fields disagree in length");
  if (!watermarks.allFinite()) throw InputError("key-set has non-finite watermarks");
  if ((watermarks.array() < kFeatureMin).any() || (watermarks.array() > kFeatureMax).any())
    throw InputError("key-set watermark outside the feature range");
}

std::vector<std::size_t> select_top_by_gap(std::span<const double> conf_extracted,
                                           std::span<const double> conf_nonextracted, std::size_t n) {
  if (conf_extracted.size() != conf_nonextracted.size())
    throw InputError("confidence vectors differ in length");
  if (n > conf_extracted.size())
    throw InputError("requested " + std::to_string(n) + " watermarks but only " +
                     std::to_string(conf_extracted.size()) + " candidates are available");
  std::vector<std::size_t> order(conf_extracted.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto gap = [&](std::size_t i) { return std::abs(conf_extracted[i] - conf_nonextracted[i]); };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gap(a) > gap(b); });
  order.resize(n);
  return order;
}

namespace {

// Mean over models of each row's probability for labels[row].
std::vector<double> mean_label_confidence(std::span<const Model> models, const Matrix& inputs,
                                          const std::vector<int>& labels) {
  std::vector<double> out(labels.size(), 0.0);
  for (const auto& m : models) {
    const Matrix conf = forward(m, inputs);
    for (std::size_t i = 0; i < labels.size(); ++i)
      out[i] += conf(static_cast<Eigen::Index>(i), labels[i]);
  }
  for (auto& v : out) v /= static_cast<double>(models.size());
  return out;
}

}  // namespace

WatermarkCandidates collect_candidates(const Model& protected_model, std::span<const Model> extracted,
                                       std::span<const Model> nonextracted, const Dataset& data,
                                       const KeySetConfig& cfg) {
  if (extracted.empty() || nonextracted.empty())
    throw InputError("key-set generation needs non-empty extracted and non-extracted populations");
  data.check();
  cfg.bim.validate();

  const auto preds = predict(protected_model, data.features);
  std::vector<std::size_t> rows;
  if (cfg.source == CandidateSource::misclassifications) {
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (preds[i] != data.labels[i]) rows.push_back(i);
  } else {
    std::vector<std::vector<int>> others;
    for (const auto& m : nonextracted) others.push_back(predict(m, data.features));
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (std::any_of(others.begin(), others.end(), [&](const auto& p) { return p[i] != preds[i]; }))
        rows.push_back(i);
  }

  WatermarkCandidates c;
  std::vector<Vector> kept;
  for (auto i : rows) {
    const auto row = static_cast<Eigen::Index>(i);
    Vector adv = bim(protected_model, data.features.row(row).transpose(), preds[i], cfg.bim);
    const int label = predict(protected_model, Matrix(adv.transpose()))[0];
    if (label == data.labels[i]) continue;
    kept.push_back(std::move(adv));
    c.labels.push_back(label);
    c.source_indices.push_back(i);
  }
  if (kept.empty())
    throw NoWatermarkMaterial("protected model '" + protected_model.provenance.id +
                              "' leaves no misclassified inputs to build watermarks from (" +
                              std::to_string(data.size()) + " rows examined)");
  c.inputs.resize(static_cast<Eigen::Index>(kept.size()), data.dims());
  for (std::size_t k = 0; k < kept.size(); ++k) c.inputs.row(static_cast<Eigen::Index>(k)) = kept[k];
  c.conf_extracted = mean_label_confidence(extracted, c.inputs, c.labels);
  c.conf_nonextracted = mean_label_confidence(nonextracted, c.inputs, c.labels);
  return c;
}

KeySet generate_keyset(const Model& protected_model, std::span<const Model> extracted,
                       std::span<const Model> nonextracted, const Dataset& data,
                       const KeySetConfig& cfg) {
  if (cfg.size == 0) throw ConfigError("key-set size must be at least 1");
  const auto c = collect_candidates(protected_model, extracted, nonextracted, data, cfg);
  if (cfg.size > c.size())
    throw InputError("requested " + std::to_string(cfg.size) + " watermarks but only " +
                     std::to_string(c.size()) + " candidates are available");
  const auto chosen = select_top_by_gap(c.conf_extracted, c.conf_nonextracted, cfg.size);

  KeySet ks;
  ks.watermarks.resize(static_cast<Eigen::Index>(chosen.size()), data.dims());
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    ks.watermarks.row(static_cast<Eigen::Index>(k)) = c.inputs.row(static_cast<Eigen::Index>(chosen[k]));
    ks.labels.push_back(c.labels[chosen[k]]);
    ks.source_indices.push_back(c.source_indices[chosen[k]]);
  }
  ks.protected_id = protected_model.provenance.id;
  io::json digest_src = {{"n", cfg.size},
                         {"source", to_string(cfg.source)},
                         {"bim",
                          {{"iterations", cfg.bim.iterations},
                           {"epsilon", io::hex_double(cfg.bim.epsilon)},
                           {"step", io::hex_double(cfg.bim.step())},
                           {"mode", cfg.bim.mode == BimMode::targeted ? "targeted" : "untargeted"}}},
                         {"extracted", extracted.size()},
                         {"nonextracted", nonextracted.size()},
                         {"data_seed", data.seed}};
  ks.config_digest = io::digest(digest_src.dump());
  return ks;
}

Vector confidence_profile(const Model& model, const KeySet& keyset) {
  keyset.check();
  if (keyset.watermarks.cols() != model.spec.input_dim())
    throw InputError("watermarks have " + std::to_string(keyset.watermarks.cols()) +
                     " features, model expects " + std::to_string(model.spec.input_dim()));
  const Matrix conf = forward(model, keyset.watermarks);
  Vector out(static_cast<Eigen::Index>(keyset.size()));
  for (std::size_t i = 0; i < keyset.size(); ++i) {
    if (keyset.labels[i] < 0 || keyset.labels[i] >= model.spec.output_classes)
      throw InputError("watermark label " + std::to_string(keyset.labels[i]) +
                       " outside the model's classes");
    out(static_cast<Eigen::Index>(i)) = conf(static_cast<Eigen::Index>(i), keyset.labels[i]);
  }
  return out;
}

Matrix confidence_table(std::span<const Model> models, const KeySet& keyset) {
  Matrix out(static_cast<Eigen::Index>(models.size()), static_cast<Eigen::Index>(keyset.size()));
  for (std::size_t m = 0; m < models.size(); ++m)
    out.row(static_cast<Eigen::Index>(m)) = confidence_profile(models[m], keyset).transpose();
  return out;
}

// ---------------------------------------------------------------- classifiers

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double gaussian_log_joint(const GaussianNb& g, int k, double x) {
  const double d = x - g.mean[k];
  return std::log(g.prior[k]) - 0.5 * std::log(2.0 * std::numbers::pi * g.variance[k]) -
         d * d / (2.0 * g.variance[k]);
}

void require_both_classes(std::span<const double> extracted, std::span<const double> nonextracted) {
  if (extracted.empty() || nonextracted.empty())
    throw InputError("classifier fitting needs samples from both classes");
  for (double v : extracted)
    if (!std::isfinite(v)) throw InputError("non-finite classifier sample");
  for (double v : nonextracted)
    if (!std::isfinite(v)) throw InputError("non-finite classifier sample");
}

}  // namespace

double WatermarkClassifier::probability_extracted(double confidence) const {
  if (const auto* lr = std::get_if<LogisticRegression>(&model))
    return sigmoid(lr->weight * confidence + lr->bias);
  const auto& g = std::get<GaussianNb>(model);
  const double l0 = gaussian_log_joint(g, 0, confidence);
  const double l1 = gaussian_log_joint(g, 1, confidence);
  return sigmoid(l1 - l0);
}

bool WatermarkClassifier::is_extracted(double confidence) const {
  if (const auto* lr = std::get_if<LogisticRegression>(&model))
    return lr->weight * confidence + lr->bias >= 0.0;
  const auto& g = std::get<GaussianNb>(model);
  return gaussian_log_joint(g, 1, confidence) >= gaussian_log_joint(g, 0, confidence);
}

std::string_view to_string(ClassifierKind k) {
  return k == ClassifierKind::logistic_regression ? "lr" : "gnb";
}

ClassifierKind parse_classifier_kind(std::string_view s) {
  if (s == "lr") return ClassifierKind::logistic_regression;
  if (s == "gnb") return ClassifierKind::gaussian_nb;
  throw ConfigError("unknown classifier kind '" + std::string(s) + "' (expected lr or gnb)");
}

WatermarkClassifier fit_lr(std::span<const double> extracted, std::span<const double> nonextracted,
                           const LrOptions& options) {
  require_both_classes(extracted, nonextracted);
  struct Sample {
    double x;
    double y;
  };
  std::vector<Sample> samples;
  for (double v : extracted) samples.push_back({v, 1.0});
  for (double v : nonextracted) samples.push_back({v, 0.0});
  const double n = static_cast<double>(samples.size());
  const double lambda = options.l2;

  auto objective = [&](double w, double b) {
    double j = 0.0;
    for (const auto& s : samples) {
      const double z = w * s.x + b;
      j += s.y > 0.5 ? softplus(-z) : softplus(z);
    }
    return j / n + 0.5 * lambda * w * w;
  };

  const double pos = static_cast<double>(extracted.size()) / n;
  double w = 0.0;
  double b = std::log(pos / (1.0 - pos));
  for (int it = 0; it < options.max_iterations; ++it) {
    double gw = 0.0, gb = 0.0, hww = 0.0, hwb = 0.0, hbb = 0.0;
    for (const auto& s : samples) {
      const double p = sigmoid(w * s.x + b);
      const double r = p - s.y;
      const double c = p * (1.0 - p);
      gw += r * s.x;
      gb += r;
      hww += c * s.x * s.x;
      hwb += c * s.x;
      hbb += c;
    }
    gw = gw / n + lambda * w;
    gb /= n;
    hww = hww / n + lambda;
    hwb /= n;
    hbb /= n;
    if (std::hypot(gw, gb) < options.gradient_tolerance) break;

    // Newton direction; fall back to steepest descent if the Hessian is
    // numerically singular.
    const double det = hww * hbb - hwb * hwb;
    double dw, db;
    if (det > 1e-300 && hbb > 0.0) {
      dw = -(hbb * gw - hwb * gb) / det;
      db = -(hww * gb - hwb * gw) / det;
    } else {
      dw = -gw;
      db = -gb;
    }
    const double j0 = objective(w, b);
    const double slope = gw * dw + gb * db;
    double t = 1.0;
    while (t > 1e-16 && objective(w + t * dw, b + t * db) > j0 + 1e-4 * t * slope) t *= 0.5;
    w += t * dw;
    b += t * db;
  }
  return {LogisticRegression{w, b}};
}

WatermarkClassifier fit_gnb(std::span<const double> extracted, std::span<const double> nonextracted,
                            double variance_floor) {
  require_both_classes(extracted, nonextracted);
  GaussianNb g;
  const double total = static_cast<double>(extracted.size() + nonextracted.size());
  auto fill = [&](int k, std::span<const double> xs) {
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    g.mean[k] = mean;
    g.variance[k] = std::max(var / n, variance_floor);
    g.prior[k] = n / total;
  };
  fill(0, nonextracted);
  fill(1, extracted);
  return {g};
}

// ---------------------------------------------------------------- verification

VerificationModel build_verifier(const Matrix& extracted_conf, const Matrix& nonextracted_conf,
                                 ClassifierKind kind) {
  if (extracted_conf.cols() != nonextracted_conf.cols())
    throw InputError("confidence tables cover different key-set sizes");
  VerificationModel v;
  for (Eigen::Index k = 0; k < extracted_conf.cols(); ++k) {
    const Vector e = extracted_conf.col(k);
    const Vector ne = nonextracted_conf.col(k);
    const std::span<const double> es(e.data(), static_cast<std::size_t>(e.size()));
    const std::span<const double> nes(ne.data(), static_cast<std::size_t>(ne.size()));
    try {
      v.classifiers.push_back(kind == ClassifierKind::logistic_regression ? fit_lr(es, nes)
                                                                          : fit_gnb(es, nes));
    } catch (const Error& err) {
      throw InputError("watermark " + std::to_string(k) + ": " + err.what());
    }
  }
  return v;
}

VerificationModel build_verifier(std::span<const Model> extracted, std::span<const Model> nonextracted,
                                 const KeySet& keyset, ClassifierKind kind) {
  if (extracted.empty() || nonextracted.empty())
    throw InputError("verifier needs non-empty extracted and non-extracted populations");
  return build_verifier(confidence_table(extracted, keyset), confidence_table(nonextracted, keyset),
                        kind);
}

Verdict verify_profile(const Vector& profile, const VerificationModel& verifier) {
  if (static_cast<std::size_t>(profile.size()) != verifier.size() || verifier.size() == 0)
    throw InputError("verifier has " + std::to_string(verifier.size()) +
                     " classifiers but the key-set has " + std::to_string(profile.size()) +
                     " watermarks");
  Verdict v;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < verifier.size(); ++i) {
    const bool e = verifier.classifiers[i].is_extracted(profile(static_cast<Eigen::Index>(i)));
    v.extracted.push_back(e);
    hits += e ? 1 : 0;
  }
  v.score = static_cast<double>(hits) / static_cast<double>(verifier.size());
  return v;
}

Verdict verify(const Model& suspect, const VerificationModel& verifier, const KeySet& keyset) {
  return verify_profile(confidence_profile(suspect, keyset), verifier);
}

// ---------------------------------------------------------------- persistence

std::string save_keyset(const KeySet& keyset) {
  keyset.check();
  io::json j = {{"format", "raw-keyset"},
                {"version", kKeySetFormatVersion},
                {"protected_id", keyset.protected_id},
                {"config_digest", keyset.config_digest},
                {"labels", keyset.labels},
                {"source_indices", keyset.source_indices},
                {"watermarks", io::matrix_to_json(keyset.watermarks)}};
  return j.dump(1) + "\n";
}

KeySet load_keyset(std::string_view text) {
  const auto j = io::parse_json(text, "key-set");
  io::check_header(j, "raw-keyset", kKeySetFormatVersion);
  try {
    KeySet ks;
    ks.protected_id = j.at("protected_id").get<std::string>();
    ks.config_digest = j.at("config_digest").get<std::string>();
    ks.labels = j.at("labels").get<std::vector<int>>();
    ks.source_indices = j.at("source_indices").get<std::vector<std::size_t>>();
    ks.watermarks = io::matrix_from_json(j.at("watermarks"));
    try {
      ks.check();
    } catch (const InputError& e) {
      throw FormatError(std::string("inconsistent key-set: ") + e.what());
    }
    return ks;
  } catch (const io::json::exception& e) {
    throw FormatError(std::string("malformed key-set: ") + e.what());
  }
}

std::string save_verifier(const VerificationModel& verifier) {
  io::json cls = io::json::array();
  for (const auto& c : verifier.classifiers) {
    if (const auto* lr = std::get_if<LogisticRegression>(&c.model)) {
      cls.push_back({{"kind", "lr"},
                     {"weight", io::hex_double(lr->weight)},
                     {"bias", io::hex_double(lr->bias)}});
    } else {
      const auto& g = std::get<GaussianNb>(c.model);
      auto pair = [](const double (&v)[2]) {
        return io::json::array({io::hex_double(v[0]), io::hex_double(v[1])});
      };
      cls.push_back({{"kind", "gnb"},
                     {"mean", pair(g.mean)},
                     {"variance", pair(g.variance)},
                     {"prior", pair(g.prior)}});
    }
  }
  io::json j = {{"format", "raw-verifier"}, {"version", kVerifierFormatVersion}, {"classifiers", cls}};
  return j.dump(1) + "\n";
}

VerificationModel load_verifier(std::string_view text) {
  const auto j = io::parse_json(text, "verifier");
  io::check_header(j, "raw-verifier", kVerifierFormatVersion);
  try {
    VerificationModel v;
    auto hex = [](const io::json& x) { return io::parse_hex_double(x.get<std::string>()); };
    for (const auto& c : j.at("classifiers")) {
      const auto kind = c.at("kind").get<std::string>();
      if (kind == "lr") {
        v.classifiers.push_back({LogisticRegression{hex(c.at("weight")), hex(c.at("bias"))}});
      } else if (kind == "gnb") {
        GaussianNb g;
        for (int k = 0; k < 2; ++k) {
          g.mean[k] = hex(c.at("mean").at(k));
          g.variance[k] = hex(c.at("variance").at(k));
          g.prior[k] = hex(c.at("prior").at(k));
          if (!(g.variance[k] > 0.0) || !(g.prior[k] > 0.0))
            throw FormatError("GNB classifier with non-positive variance or prior");
        }
        v.classifiers.push_back({g});
      } else {
        throw FormatError("unknown classifier kind '" + kind + "'");
      }
    }
    if (v.classifiers.empty()) throw FormatError("verifier has no classifiers");
    return v;
  } catch (const io::json::exception& e) {
    throw FormatError(std::string("malformed verifier: ") + e.what());
  }
}

}  // namespace raw
