#include "raw/harness.hpp"

#include "raw/error.hpp"
#include "raw/rng.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

namespace raw {

// ---------------------------------------------------------------- attack names

std::string AttackSpec::name() const {
  const std::string base(abbreviation(extraction));
  return blur ? std::string(abbreviation(*blur)) + "(" + base + ")" : base;
}

AttackSpec AttackSpec::parse(std::string_view text) {
  AttackSpec a;
  const auto open = text.find('(');
  if (open == std::string_view::npos) {
    a.extraction = parse_attack_kind(text);
    return a;
  }
  if (text.back() != ')') throw ConfigError("malformed attack name '" + std::string(text) + "'");
  a.blur = parse_blur_method(text.substr(0, open));
  a.extraction = parse_attack_kind(text.substr(open + 1, text.size() - open - 2));
  return a;
}

// ---------------------------------------------------------------- config

void EvaluationConfig::validate() const {
  data.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  for (const auto& [name, fam] : families)
    if (fam.hidden.empty()) throw ConfigError("family '" + name + "' has no hidden layers");
  auto need_family = [&](const std::string& f) {
    if (!families.contains(f)) throw ConfigError("unknown model family '" + f + "'");
  };
  need_family(protected_family);
  need_family(cross_arch_family);
  if (nonextracted_families.empty()) throw ConfigError("nonextracted_families is empty");
  for (const auto& f : nonextracted_families) need_family(f);
  if (train_population.extracted == 0 || train_population.nonextracted == 0 ||
      test_population.extracted == 0 || test_population.nonextracted == 0)
    throw ConfigError("population sizes must be positive");
  if (seen.empty() || unseen.empty()) throw ConfigError("seen and unseen attack lists must be non-empty");
  if (!allow_attack_overlap)
    for (const auto& a : unseen)
      if (std::find(seen.begin(), seen.end(), a) != seen.end())
        throw ConfigError("attack " + a.name() +
                          " is both seen and unseen (set allow_attack_overlap for sanity runs)");
  if (repetitions <= 0) throw ConfigError("repetitions must be positive");
  if (keyset.size == 0) throw ConfigError("keyset.size must be positive");
  keyset.bim.validate();
  if (keygen_split != "test" && keygen_split != "train")
    throw ConfigError("keygen_split must be 'test' or 'train'");
  train.validate();
  if (!(query_budget_fraction > 0.0 && query_budget_fraction <= 1.0))
    throw ConfigError("query_budget_fraction must lie in (0, 1]");
  if (!(distill_temperature > 0.0)) throw ConfigError("distill_temperature must be > 0");
  if (frozen_layers >= families.at(protected_family).hidden.size() + 1)
    throw ConfigError("frozen_layers must be smaller than the protected family's dense layer count");
  if (!(copycat_probe_factor > 0.0)) throw ConfigError("copycat_probe_factor must be > 0");
  BlurConfig{BlurConfig::Method::weight_pruning, prune_sparsity, quant_bits}.validate();
  BlurConfig{BlurConfig::Method::weight_quantization, prune_sparsity, quant_bits}.validate();
}

ModelSpec EvaluationConfig::spec_for(const std::string& family) const {
  const auto it = families.find(family);
  if (it == families.end()) throw ConfigError("unknown model family '" + family + "'");
  return family_spec(it->second, data.dims, data.classes);
}

io::json EvaluationConfig::to_json() const {
  using io::json;
  json fams = json::object();
  for (const auto& [name, f] : families)
    fams[name] = {{"hidden", f.hidden}, {"activation", to_string(f.activation)}};
  auto names = [](const std::vector<AttackSpec>& v) {
    json a = json::array();
    for (const auto& s : v) a.push_back(s.name());
    return a;
  };
  json opt;
  if (const auto* a = std::get_if<AdamParams>(&train.optimizer))
    opt = {{"kind", "adam"}, {"beta1", a->beta1}, {"beta2", a->beta2}, {"eps", a->eps}};
  else
    opt = {{"kind", "sgd"}};
  json bim = {{"iterations", keyset.bim.iterations},
              {"epsilon", keyset.bim.epsilon},
              {"step_size", keyset.bim.step_size ? json(*keyset.bim.step_size) : json(nullptr)},
              {"clip_lo", keyset.bim.clip_lo},
              {"clip_hi", keyset.bim.clip_hi},
              {"mode", keyset.bim.mode == BimMode::targeted ? "targeted" : "untargeted"}};
  return {
      {"master_seed", master_seed},
      {"data",
       {{"kind", to_string(data.kind)},
        {"classes", data.classes},
        {"dims", data.dims},
        {"samples_per_class", data.samples_per_class},
        {"spread", data.spread}}},
      {"test_fraction", test_fraction},
      {"families", fams},
      {"protected_family", protected_family},
      {"nonextracted_families", nonextracted_families},
      {"cross_arch_family", cross_arch_family},
      {"train_population", {{"extracted", train_population.extracted}, {"nonextracted", train_population.nonextracted}}},
      {"test_population", {{"extracted", test_population.extracted}, {"nonextracted", test_population.nonextracted}}},
      {"seen", names(seen)},
      {"unseen", names(unseen)},
      {"allow_attack_overlap", allow_attack_overlap},
      {"repetitions", repetitions},
      {"classifier", to_string(classifier)},
      {"keyset", {{"size", keyset.size}, {"source", to_string(keyset.source)}, {"bim", bim}}},
      {"keygen_split", keygen_split},
      {"train",
       {{"epochs", train.epochs},
        {"batch_size", train.batch_size},
        {"learning_rate", train.learning_rate},
        {"optimizer", opt}}},
      {"query_budget_fraction", query_budget_fraction},
      {"distill_temperature", distill_temperature},
      {"frozen_layers", frozen_layers},
      {"copycat_probe_factor", copycat_probe_factor},
      {"prune_sparsity", prune_sparsity},
      {"quant_bits", quant_bits},
      {"threads", threads},
  };
}

namespace {

void reject_unknown(const io::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (std::none_of(keys.begin(), keys.end(), [&](const char* key) { return k == key; }))
      throw ConfigError("unknown config key '" + where + k + "'");
}

template <typename T>
void read(const io::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

EvaluationConfig EvaluationConfig::from_json(const io::json& j) {
  EvaluationConfig c;
  try {
    reject_unknown(j,
                   {"master_seed", "data", "test_fraction", "families", "protected_family",
                    "nonextracted_families", "cross_arch_family", "train_population", "test_population",
                    "seen", "unseen", "allow_attack_overlap", "repetitions", "classifier", "keyset",
                    "keygen_split", "train", "query_budget_fraction", "distill_temperature",
                    "frozen_layers", "copycat_probe_factor", "prune_sparsity", "quant_bits", "threads"},
                   "");
    read(j, "master_seed", c.master_seed);
    if (j.contains("data")) {
      const auto& d = j["data"];
      reject_unknown(d, {"kind", "classes", "dims", "samples_per_class", "spread"}, "data.");
      if (d.contains("kind")) c.data.kind = parse_gen_kind(d["kind"].get<std::string>());
      read(d, "classes", c.data.classes);
      read(d, "dims", c.data.dims);
      read(d, "samples_per_class", c.data.samples_per_class);
      read(d, "spread", c.data.spread);
    }
    read(j, "test_fraction", c.test_fraction);
    if (j.contains("families")) {
      for (const auto& [name, f] : j["families"].items()) {
        reject_unknown(f, {"hidden", "activation"}, "families." + name + ".");
        FamilyDef def;
        def.hidden = f.at("hidden").get<std::vector<Eigen::Index>>();
        def.activation = parse_activation(f.at("activation").get<std::string>());
        c.families[name] = def;
      }
    }
    read(j, "protected_family", c.protected_family);
    read(j, "nonextracted_families", c.nonextracted_families);
    read(j, "cross_arch_family", c.cross_arch_family);
    for (auto [key, target] : {std::pair{"train_population", &c.train_population},
                               std::pair{"test_population", &c.test_population}}) {
      if (!j.contains(key)) continue;
      reject_unknown(j[key], {"extracted", "nonextracted"}, std::string(key) + ".");
      read(j[key], "extracted", target->extracted);
      read(j[key], "nonextracted", target->nonextracted);
    }
    auto attacks = [&](const char* key, std::vector<AttackSpec>& out) {
      if (!j.contains(key)) return;
      out.clear();
      for (const auto& s : j[key]) out.push_back(AttackSpec::parse(s.get<std::string>()));
    };
    attacks("seen", c.seen);
    attacks("unseen", c.unseen);
    read(j, "allow_attack_overlap", c.allow_attack_overlap);
    read(j, "repetitions", c.repetitions);
    if (j.contains("classifier")) c.classifier = parse_classifier_kind(j["classifier"].get<std::string>());
    if (j.contains("keyset")) {
      const auto& k = j["keyset"];
      reject_unknown(k, {"size", "source", "bim"}, "keyset.");
      read(k, "size", c.keyset.size);
      if (k.contains("source")) c.keyset.source = parse_candidate_source(k["source"].get<std::string>());
      if (k.contains("bim")) {
        const auto& b = k["bim"];
        reject_unknown(b, {"iterations", "epsilon", "step_size", "clip_lo", "clip_hi", "mode"}, "keyset.bim.");
        read(b, "iterations", c.keyset.bim.iterations);
        read(b, "epsilon", c.keyset.bim.epsilon);
        if (b.contains("step_size") && !b["step_size"].is_null())
          c.keyset.bim.step_size = b["step_size"].get<double>();
        read(b, "clip_lo", c.keyset.bim.clip_lo);
        read(b, "clip_hi", c.keyset.bim.clip_hi);
        if (b.contains("mode")) {
          const auto mode = b["mode"].get<std::string>();
          if (mode != "targeted" && mode != "untargeted") throw ConfigError("unknown BIM mode '" + mode + "'");
          c.keyset.bim.mode = mode == "targeted" ? BimMode::targeted : BimMode::untargeted;
        }
      }
    }
    read(j, "keygen_split", c.keygen_split);
    if (j.contains("train")) {
      const auto& t = j["train"];
      reject_unknown(t, {"epochs", "batch_size", "learning_rate", "optimizer"}, "train.");
      read(t, "epochs", c.train.epochs);
      read(t, "batch_size", c.train.batch_size);
      read(t, "learning_rate", c.train.learning_rate);
      if (t.contains("optimizer")) {
        const auto& o = t["optimizer"];
        reject_unknown(o, {"kind", "beta1", "beta2", "eps"}, "train.optimizer.");
        const auto kind = o.value("kind", std::string("adam"));
        if (kind == "sgd") {
          c.train.optimizer = SgdParams{};
        } else if (kind == "adam") {
          AdamParams a;
          read(o, "beta1", a.beta1);
          read(o, "beta2", a.beta2);
          read(o, "eps", a.eps);
          c.train.optimizer = a;
        } else {
          throw ConfigError("unknown optimizer '" + kind + "'");
        }
      }
    }
    read(j, "query_budget_fraction", c.query_budget_fraction);
    read(j, "distill_temperature", c.distill_temperature);
    read(j, "frozen_layers", c.frozen_layers);
    read(j, "copycat_probe_factor", c.copycat_probe_factor);
    read(j, "prune_sparsity", c.prune_sparsity);
    read(j, "quant_bits", c.quant_bits);
    read(j, "threads", c.threads);
  } catch (const io::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

std::string EvaluationConfig::digest() const {
  auto j = to_json();
  j.erase("threads");
  return io::digest(j.dump());
}

// ---------------------------------------------------------------- populations

const Dataset& Environment::keygen_data(const EvaluationConfig& cfg) const {
  return cfg.keygen_split == "train" ? train : test;
}

Environment make_environment(const EvaluationConfig& cfg) {
  const Dataset full = generate(cfg.data, derive_seed(cfg.master_seed, "data"));
  auto [train, test] = split(full, cfg.test_fraction, derive_seed(cfg.master_seed, "split"));
  Dataset pretrain = generate(cfg.data, derive_seed(cfg.master_seed, "pretrain-data"));
  pretrain.name += "/pretrain";
  return {std::move(train), std::move(test), std::move(pretrain)};
}

Model train_fresh(const EvaluationConfig& cfg, const Environment& env, const std::string& family,
                  std::uint64_t seed, std::string id) {
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  Model m = train(init_model(cfg.spec_for(family), seed), env.train, tc);
  m.provenance.id = std::move(id);
  return m;
}

ExtractionConfig extraction_config(const EvaluationConfig& cfg, AttackKind kind, std::uint64_t seed) {
  ExtractionConfig e;
  e.kind = kind;
  e.query_budget_fraction = cfg.query_budget_fraction;
  e.surrogate_spec = cfg.spec_for(kind == AttackKind::cross_arch_retraining ? cfg.cross_arch_family
                                                                            : cfg.protected_family);
  e.train_cfg = cfg.train;
  e.train_cfg.seed = seed;
  if (kind == AttackKind::distillation) e.distill_temperature = cfg.distill_temperature;
  if (kind == AttackKind::transfer_learning) e.frozen_layers = cfg.frozen_layers;
  return e;
}

Model informed_attack_pipeline(const Model& victim, const Matrix& attacker_inputs,
                               const ExtractionConfig& extraction, const BlurConfig& blurring,
                               const Model* pretrained) {
  return blur(extract(victim, attacker_inputs, extraction, pretrained), blurring);
}

Model make_extracted(const EvaluationConfig& cfg, const Environment& env, const Model& victim,
                     const AttackSpec& attack, std::uint64_t seed, std::string id) {
  const ExtractionConfig ecfg = extraction_config(cfg, attack.extraction, seed);
  std::optional<Model> pretrained;
  Matrix inputs = env.train.features;
  if (attack.extraction == AttackKind::transfer_learning) {
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, "pretrain");
    pretrained = train(init_model(ecfg.surrogate_spec, tc.seed), env.pretrain, tc);
    pretrained->provenance.id = "pretrained#" + std::to_string(tc.seed);
  } else if (attack.extraction == AttackKind::copycat) {
    const auto count = static_cast<Eigen::Index>(
        std::llround(cfg.copycat_probe_factor * static_cast<double>(env.train.size())));
    inputs = random_probe_inputs(count, env.train.dims(), kFeatureMin, kFeatureMax,
                                 derive_seed(seed, "probes"));
  }
  Model m;
  if (attack.blur) {
    BlurConfig b{*attack.blur, cfg.prune_sparsity, cfg.quant_bits};
    m = informed_attack_pipeline(victim, inputs, ecfg, b, pretrained ? &*pretrained : nullptr);
  } else {
    m = extract(victim, inputs, ecfg, pretrained ? &*pretrained : nullptr);
  }
  m.provenance.id = std::move(id);
  return m;
}

ConfidenceDump make_confidence_dump(std::span<const Model> extracted, std::span<const Model> nonextracted,
                                    const KeySet& keyset) {
  ConfidenceDump d;
  d.labels = keyset.labels;
  for (const auto& m : extracted) d.extracted_ids.push_back(m.provenance.id);
  for (const auto& m : nonextracted) d.nonextracted_ids.push_back(m.provenance.id);
  d.extracted = confidence_table(extracted, keyset);
  d.nonextracted = confidence_table(nonextracted, keyset);
  return d;
}

// ---------------------------------------------------------------- evaluation

namespace {

struct ModelJob {
  enum class Kind { fresh, extracted } kind;
  std::string family;  // fresh
  AttackSpec attack;   // extracted
  std::uint64_t seed;
  std::string id;
};

std::vector<Model> build_population(const EvaluationConfig& cfg, const Environment& env,
                                    const Model& victim, const std::vector<ModelJob>& jobs) {
  return parallel_map(jobs.size(), cfg.threads, [&](std::size_t i) {
    const auto& j = jobs[i];
    return j.kind == ModelJob::Kind::fresh ? train_fresh(cfg, env, j.family, j.seed, j.id)
                                           : make_extracted(cfg, env, victim, j.attack, j.seed, j.id);
  });
}

// Round-robin over `attacks` so each is used equally often.
std::vector<ModelJob> extracted_jobs(const std::vector<AttackSpec>& attacks, std::size_t count,
                                     std::uint64_t rep_seed, const std::string& tag, int rep) {
  std::vector<ModelJob> jobs;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& a = attacks[i % attacks.size()];
    jobs.push_back({ModelJob::Kind::extracted, "", a, derive_seed(rep_seed, tag, i),
                    "rep" + std::to_string(rep) + "/" + tag + "/" + a.name() + "#" + std::to_string(i)});
  }
  return jobs;
}

std::vector<ModelJob> fresh_jobs(const std::vector<std::string>& families, std::size_t count,
                                 std::uint64_t rep_seed, const std::string& tag, int rep) {
  std::vector<ModelJob> jobs;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& f = families[i % families.size()];
    jobs.push_back({ModelJob::Kind::fresh, f, {}, derive_seed(rep_seed, tag, i),
                    "rep" + std::to_string(rep) + "/" + tag + "/" + f + "#" + std::to_string(i)});
  }
  return jobs;
}

}  // namespace

EvaluationReport run_raw_evaluation(const EvaluationConfig& cfg) {
  cfg.validate();
  const Environment env = make_environment(cfg);
  EvaluationReport report;
  report.config_digest = cfg.digest();

  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    try {
      const std::uint64_t rs = derive_seed(cfg.master_seed, "repetition", static_cast<std::uint64_t>(rep));
      RepetitionSummary summary;
      summary.repetition = rep;
      const Model protected_model = train_fresh(cfg, env, cfg.protected_family, derive_seed(rs, "protected"),
                                                "rep" + std::to_string(rep) + "/protected");
      summary.protected_id = protected_model.provenance.id;
      summary.protected_accuracy = accuracy(protected_model, env.test.features, env.test.labels);

      const auto train_ext = build_population(
          cfg, env, protected_model, extracted_jobs(cfg.seen, cfg.train_population.extracted, rs, "train-extracted", rep));
      const auto train_non = build_population(
          cfg, env, protected_model,
          fresh_jobs(cfg.nonextracted_families, cfg.train_population.nonextracted, rs, "train-nonextracted", rep));

      const Dataset& kdata = env.keygen_data(cfg);
      summary.candidates = collect_candidates(protected_model, train_ext, train_non, kdata, cfg.keyset).size();
      summary.keyset = generate_keyset(protected_model, train_ext, train_non, kdata, cfg.keyset);
      summary.dump = make_confidence_dump(train_ext, train_non, summary.keyset);
      const auto verifier = build_verifier(summary.dump.extracted, summary.dump.nonextracted, cfg.classifier);
      summary.protected_self_score = verify(protected_model, verifier, summary.keyset).score;

      const auto test_ext_jobs = extracted_jobs(cfg.unseen, cfg.test_population.extracted, rs, "test-extracted", rep);
      const auto test_non_jobs =
          fresh_jobs(cfg.nonextracted_families, cfg.test_population.nonextracted, rs, "test-nonextracted", rep);
      const auto test_ext = build_population(cfg, env, protected_model, test_ext_jobs);
      const auto test_non = build_population(cfg, env, protected_model, test_non_jobs);

      std::vector<double> pos, neg;
      for (std::size_t i = 0; i < test_ext.size(); ++i) {
        const double s = verify(test_ext[i], verifier, summary.keyset).score;
        report.scores.push_back({rep, test_ext[i].provenance.id, test_ext_jobs[i].attack.name(), true, s});
        pos.push_back(s);
      }
      for (std::size_t i = 0; i < test_non.size(); ++i) {
        const double s = verify(test_non[i], verifier, summary.keyset).score;
        report.scores.push_back({rep, test_non[i].provenance.id, "family:" + test_non_jobs[i].family, false, s});
        neg.push_back(s);
      }
      summary.roc = roc_auc(pos, neg);
      report.repetitions.push_back(std::move(summary));
    } catch (const Error& e) {
      throw Error(e.kind(), "repetition " + std::to_string(rep) + ": " + e.what());
    }
  }

  std::sort(report.scores.begin(), report.scores.end(), [](const ScoredModel& a, const ScoredModel& b) {
    return std::tie(a.repetition, a.id) < std::tie(b.repetition, b.id);
  });
  std::vector<double> pos, neg;
  for (const auto& s : report.scores) (s.extracted ? pos : neg).push_back(s.score);
  report.roc = roc_auc(pos, neg);
  auto mean = [](const std::vector<double>& v) {
    double t = 0.0;
    for (double x : v) t += x;
    return t / static_cast<double>(v.size());
  };
  report.mean_extracted_score = mean(pos);
  report.mean_nonextracted_score = mean(neg);
  for (const auto& r : report.repetitions) report.repetitions_above_chance += r.roc.auc > 0.5 ? 1 : 0;
  report.sign_test_p = sign_test_p(report.repetitions_above_chance, cfg.repetitions);
  return report;
}

// ---------------------------------------------------------------- export

std::string scores_csv(const EvaluationReport& report) {
  std::ostringstream out;
  out << "repetition,model_id,attack,extracted,score\n";
  for (const auto& s : report.scores)
    out << s.repetition << ',' << s.id << ',' << s.attack << ',' << (s.extracted ? 1 : 0) << ','
        << io::decimal(s.score) << '\n';
  return out.str();
}

std::string summary_csv(const EvaluationReport& report) {
  std::ostringstream out;
  out << "metric,value\n";
  out << "config_digest," << report.config_digest << '\n';
  out << "auc," << io::decimal(report.roc.auc) << '\n';
  out << "tpr_at_fpr0," << io::decimal(report.roc.tpr_at_fpr0) << '\n';
  out << "fpr_at_tpr1," << io::decimal(report.roc.fpr_at_tpr1) << '\n';
  out << "mean_extracted_score," << io::decimal(report.mean_extracted_score) << '\n';
  out << "mean_nonextracted_score," << io::decimal(report.mean_nonextracted_score) << '\n';
  out << "repetitions_above_chance," << report.repetitions_above_chance << '\n';
  out << "sign_test_p," << io::decimal(report.sign_test_p) << '\n';
  for (const auto& r : report.repetitions) {
    const std::string p = "rep" + std::to_string(r.repetition) + "_";
    out << p << "auc," << io::decimal(r.roc.auc) << '\n';
    out << p << "protected_accuracy," << io::decimal(r.protected_accuracy) << '\n';
    out << p << "candidates," << r.candidates << '\n';
    out << p << "protected_self_score," << io::decimal(r.protected_self_score) << '\n';
  }
  return out.str();
}

std::string confidence_dump_csv(const ConfidenceDump& dump) {
  std::ostringstream out;
  out << "watermark,label,mean_extracted,mean_nonextracted";
  for (const auto& id : dump.extracted_ids) out << ",e:" << id;
  for (const auto& id : dump.nonextracted_ids) out << ",ne:" << id;
  out << '\n';
  for (std::size_t k = 0; k < dump.labels.size(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    out << k << ',' << dump.labels[k] << ',' << io::decimal(dump.extracted.col(col).mean()) << ','
        << io::decimal(dump.nonextracted.col(col).mean());
    for (Eigen::Index m = 0; m < dump.extracted.rows(); ++m) out << ',' << io::decimal(dump.extracted(m, col));
    for (Eigen::Index m = 0; m < dump.nonextracted.rows(); ++m)
      out << ',' << io::decimal(dump.nonextracted(m, col));
    out << '\n';
  }
  return out.str();
}

std::vector<std::string> export_report(const EvaluationReport& report, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create results directory '" + dir + "': " + ec.message());
  const auto base = std::filesystem::path(dir);
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const std::string& text) {
    const auto path = (base / name).string();
    io::write_file(path, text);
    written.push_back(path);
  };
  put("roc_" + report.config_digest + ".csv", roc_points_csv(report.roc));
  put("summary_" + report.config_digest + ".csv", summary_csv(report));
  put("scores_" + report.config_digest + ".csv", scores_csv(report));
  for (const auto& r : report.repetitions)
    put("confidences_" + report.config_digest + "_rep" + std::to_string(r.repetition) + ".csv",
        confidence_dump_csv(r.dump));
  return written;
}

void dump_confidences(std::span<const Model> extracted, std::span<const Model> nonextracted,
                      const KeySet& keyset, const std::string& path) {
  io::write_file(path, confidence_dump_csv(make_confidence_dump(extracted, nonextracted, keyset)));
}

}  // namespace raw
