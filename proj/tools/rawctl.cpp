#include "raw/attacks.hpp"
#include "raw/boundary.hpp"
#include "raw/data.hpp"
#include "raw/error.hpp"
#include "raw/harness.hpp"
#include "raw/io.hpp"
#include "raw/rng.hpp"
#include "raw/watermark.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

using namespace raw;
namespace fs = std::filesystem;

namespace {

Model load_model_file(const std::string& path) {
  Model m = load_model(io::read_file(path));
  if (m.provenance.id.empty()) m.provenance.id = fs::path(path).stem().string();
  return m;
}

std::vector<Model> load_models(const std::vector<std::string>& paths) {
  std::vector<Model> out;
  for (const auto& p : paths) out.push_back(load_model_file(p));
  return out;
}

Dataset load_data_file(const std::string& path) { return load_dataset(io::read_file(path)); }

// Evaluation config whose model shapes match `data`.
EvaluationConfig shaped_config(const Dataset& data) {
  EvaluationConfig c;
  c.data.dims = static_cast<int>(data.dims());
  c.data.classes = data.class_count;
  return c;
}

void emit(const io::json& j) { std::cout << j.dump(2) << '\n'; }

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << io::json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Watermark-based extraction detection toolkit"};
  app.require_subcommand(1);

  // ------------------------------------------------------------ generate
  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset and split it");
  GenSpec gspec;
  std::uint64_t gen_seed = 1;
  double gen_test_fraction = 0.5;
  std::string gen_kind = "gaussian_blobs", gen_train_out, gen_test_out;
  gen->add_option("--seed", gen_seed);
  gen->add_option("--kind", gen_kind);
  gen->add_option("--classes", gspec.classes);
  gen->add_option("--dims", gspec.dims);
  gen->add_option("--samples-per-class", gspec.samples_per_class);
  gen->add_option("--spread", gspec.spread);
  gen->add_option("--test-fraction", gen_test_fraction);
  gen->add_option("--train-out", gen_train_out)->required();
  gen->add_option("--test-out", gen_test_out)->required();

  // ------------------------------------------------------------ train-population
  auto* trn = app.add_subcommand("train-population", "Train independently seeded models");
  std::string trn_data, trn_family = "A", trn_dir;
  std::size_t trn_count = 1;
  std::uint64_t trn_seed = 1;
  int trn_epochs = TrainConfig{}.epochs;
  trn->add_option("--data", trn_data)->required();
  trn->add_option("--family", trn_family);
  trn->add_option("--count", trn_count);
  trn->add_option("--seed", trn_seed);
  trn->add_option("--epochs", trn_epochs);
  trn->add_option("--out-dir", trn_dir)->required();

  // ------------------------------------------------------------ extract
  auto* ext = app.add_subcommand("extract", "Extract a surrogate from a victim model");
  std::string ext_victim, ext_data, ext_attack = "RET", ext_pretrain, ext_out;
  std::uint64_t ext_seed = 1;
  double ext_budget = EvaluationConfig{}.query_budget_fraction;
  ext->add_option("--victim", ext_victim)->required();
  ext->add_option("--data", ext_data, "attacker data")->required();
  ext->add_option("--attack", ext_attack, "RET, DIS, TRL, CAR, CPY, optionally wrapped as WP(..) or WQ(..)");
  ext->add_option("--pretrain-data", ext_pretrain, "source task data for TRL");
  ext->add_option("--budget", ext_budget);
  ext->add_option("--seed", ext_seed);
  ext->add_option("--out", ext_out)->required();

  // ------------------------------------------------------------ blur
  auto* blr = app.add_subcommand("blur", "Prune or quantize a model");
  std::string blr_model, blr_method = "WP", blr_out;
  BlurConfig blr_cfg;
  blr->add_option("--model", blr_model)->required();
  blr->add_option("--method", blr_method, "WP or WQ");
  blr->add_option("--sparsity", blr_cfg.sparsity);
  blr->add_option("--bits", blr_cfg.bits);
  blr->add_option("--out", blr_out)->required();

  // ------------------------------------------------------------ analyze
  auto* ana = app.add_subcommand("analyze", "Disagreement subset analysis of a model population");
  std::vector<std::string> ana_protected, ana_extracted, ana_strategies{"none", "unique", "disagreements",
                                                                        "entire_set"};
  std::string ana_data, ana_out;
  BimConfig ana_bim;
  ana->add_option("--data", ana_data)->required();
  ana->add_option("--protected", ana_protected)->required();
  ana->add_option("--extracted", ana_extracted, "one per protected model, same order")->required();
  ana->add_option("--strategy", ana_strategies);
  ana->add_option("--epsilon", ana_bim.epsilon);
  ana->add_option("--iterations", ana_bim.iterations);
  ana->add_option("--out", ana_out, "CSV table");

  // ------------------------------------------------------------ keygen
  auto* key = app.add_subcommand("keygen", "Generate a watermark key-set");
  std::string key_protected, key_data, key_source = "misclassifications", key_out;
  std::vector<std::string> key_extracted, key_nonextracted;
  KeySetConfig key_cfg;
  key->add_option("--protected", key_protected)->required();
  key->add_option("--extracted", key_extracted)->required();
  key->add_option("--nonextracted", key_nonextracted)->required();
  key->add_option("--data", key_data)->required();
  key->add_option("--size", key_cfg.size);
  key->add_option("--source", key_source);
  key->add_option("--epsilon", key_cfg.bim.epsilon);
  key->add_option("--iterations", key_cfg.bim.iterations);
  key->add_option("--out", key_out)->required();

  // ------------------------------------------------------------ build-verifier
  auto* bld = app.add_subcommand("build-verifier", "Fit per-watermark classifiers");
  std::string bld_keyset, bld_classifier = "lr", bld_out;
  std::vector<std::string> bld_extracted, bld_nonextracted;
  bld->add_option("--keyset", bld_keyset)->required();
  bld->add_option("--extracted", bld_extracted)->required();
  bld->add_option("--nonextracted", bld_nonextracted)->required();
  bld->add_option("--classifier", bld_classifier, "lr or gnb");
  bld->add_option("--out", bld_out)->required();

  // ------------------------------------------------------------ verify
  auto* ver = app.add_subcommand("verify", "Score a suspect model");
  std::string ver_model, ver_keyset, ver_verifier;
  ver->add_option("--model", ver_model)->required();
  ver->add_option("--keyset", ver_keyset)->required();
  ver->add_option("--verifier", ver_verifier)->required();

  // ------------------------------------------------------------ evaluate
  auto* eva = app.add_subcommand("evaluate", "Run the full evaluation");
  std::string eva_config, eva_out = "results";
  std::optional<std::uint64_t> eva_seed;
  std::optional<int> eva_reps;
  std::optional<unsigned> eva_threads;
  bool eva_print_config = false;
  eva->add_option("--config", eva_config, "JSON config; missing keys keep their defaults");
  eva->add_option("--seed", eva_seed);
  eva->add_option("--repetitions", eva_reps);
  eva->add_option("--threads", eva_threads);
  eva->add_option("--out", eva_out);
  eva->add_flag("--print-config", eva_print_config, "print the resolved config and exit");

  // ------------------------------------------------------------ dump-confidences
  auto* dmp = app.add_subcommand("dump-confidences", "Per-watermark confidence table");
  std::string dmp_keyset, dmp_out;
  std::vector<std::string> dmp_extracted, dmp_nonextracted;
  dmp->add_option("--keyset", dmp_keyset)->required();
  dmp->add_option("--extracted", dmp_extracted)->required();
  dmp->add_option("--nonextracted", dmp_nonextracted)->required();
  dmp->add_option("--out", dmp_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*gen) {
      gspec.kind = parse_gen_kind(gen_kind);
      const Dataset full = generate(gspec, gen_seed);
      auto [tr, te] = split(full, gen_test_fraction, derive_seed(gen_seed, "split"));
      io::write_file(gen_train_out, save_dataset(tr));
      io::write_file(gen_test_out, save_dataset(te));
      emit({{"train", gen_train_out}, {"train_rows", tr.size()}, {"test", gen_test_out}, {"test_rows", te.size()}});
    } else if (*trn) {
      const Dataset data = load_data_file(trn_data);
      auto cfg = shaped_config(data);
      cfg.train.epochs = trn_epochs;
      const Environment env{data, data, data};
      fs::create_directories(trn_dir);
      io::json written = io::json::array();
      for (std::size_t i = 0; i < trn_count; ++i) {
        const std::string id = trn_family + "_" + std::to_string(i);
        const Model m = train_fresh(cfg, env, trn_family, derive_seed(trn_seed, "model", i), id);
        const auto path = (fs::path(trn_dir) / (id + ".json")).string();
        io::write_file(path, save_model(m));
        written.push_back({{"path", path}, {"train_accuracy", accuracy(m, data.features, data.labels)}});
      }
      emit({{"models", written}});
    } else if (*ext) {
      const Model victim = load_model_file(ext_victim);
      const Dataset data = load_data_file(ext_data);
      const AttackSpec attack = AttackSpec::parse(ext_attack);
      auto cfg = shaped_config(data);
      cfg.query_budget_fraction = ext_budget;
      Environment env{data, data, data};
      if (attack.extraction == AttackKind::transfer_learning) {
        if (ext_pretrain.empty()) throw ConfigError("TRL needs --pretrain-data");
        env.pretrain = load_data_file(ext_pretrain);
      }
      const auto id = fs::path(ext_out).stem().string();
      const Model m = make_extracted(cfg, env, victim, attack, ext_seed, id);
      io::write_file(ext_out, save_model(m));
      emit({{"model", ext_out}, {"attack", attack.name()}, {"agreement", agreement(victim, m, data.features)}});
    } else if (*blr) {
      blr_cfg.method = parse_blur_method(blr_method);
      Model m = blur(load_model_file(blr_model), blr_cfg);
      m.provenance.id = fs::path(blr_out).stem().string();
      io::write_file(blr_out, save_model(m));
      emit({{"model", blr_out}, {"method", std::string(abbreviation(blr_cfg.method))}});
    } else if (*ana) {
      const Dataset data = load_data_file(ana_data);
      const auto prot = load_models(ana_protected);
      const auto extr = load_models(ana_extracted);
      std::vector<SubsetReport> rows;
      io::json out = io::json::array();
      for (const auto& s : ana_strategies) {
        const auto r = run_strategy_analysis(prot, extr, data, parse_strategy(s), ana_bim);
        rows.push_back(r);
        out.push_back({{"strategy", std::string(to_string(r.strategy))},
                       {"disagreement_share", r.disagreement_share},
                       {"unique_share", r.unique_share},
                       {"transferable_share", r.transferable_share},
                       {"mean_transferable_confidence", r.mean_transferable_confidence}});
      }
      if (!ana_out.empty()) io::write_file(ana_out, subset_table_csv(rows));
      emit({{"strategies", out}});
    } else if (*key) {
      key_cfg.source = parse_candidate_source(key_source);
      const Model prot = load_model_file(key_protected);
      const auto e = load_models(key_extracted);
      const auto ne = load_models(key_nonextracted);
      const KeySet ks = generate_keyset(prot, e, ne, load_data_file(key_data), key_cfg);
      io::write_file(key_out, save_keyset(ks));
      emit({{"keyset", key_out}, {"size", ks.size()}, {"config_digest", ks.config_digest}});
    } else if (*bld) {
      const KeySet ks = load_keyset(io::read_file(bld_keyset));
      const auto v = build_verifier(load_models(bld_extracted), load_models(bld_nonextracted), ks,
                                    parse_classifier_kind(bld_classifier));
      io::write_file(bld_out, save_verifier(v));
      emit({{"verifier", bld_out}, {"size", v.size()}});
    } else if (*ver) {
      const KeySet ks = load_keyset(io::read_file(ver_keyset));
      const auto v = load_verifier(io::read_file(ver_verifier));
      const Model m = load_model_file(ver_model);
      const Verdict verdict = verify(m, v, ks);
      io::json decisions = io::json::array();
      for (bool b : verdict.extracted) decisions.push_back(b);
      emit({{"model", m.provenance.id}, {"score", verdict.score}, {"decisions", decisions}});
    } else if (*eva) {
      EvaluationConfig cfg;
      if (!eva_config.empty())
        cfg = EvaluationConfig::from_json(io::parse_json(io::read_file(eva_config), eva_config));
      if (eva_seed) cfg.master_seed = *eva_seed;
      if (eva_reps) cfg.repetitions = *eva_reps;
      if (eva_threads) cfg.threads = *eva_threads;
      cfg.validate();
      if (eva_print_config) {
        emit(cfg.to_json());
        return 0;
      }
      const auto report = run_raw_evaluation(cfg);
      const auto files = export_report(report, eva_out);
      emit({{"config_digest", report.config_digest},
            {"auc", report.roc.auc},
            {"tpr_at_fpr0", report.roc.tpr_at_fpr0},
            {"fpr_at_tpr1", report.roc.fpr_at_tpr1},
            {"mean_extracted_score", report.mean_extracted_score},
            {"mean_nonextracted_score", report.mean_nonextracted_score},
            {"repetitions_above_chance", report.repetitions_above_chance},
            {"sign_test_p", report.sign_test_p},
            {"files", files}});
    } else if (*dmp) {
      const KeySet ks = load_keyset(io::read_file(dmp_keyset));
      dump_confidences(load_models(dmp_extracted), load_models(dmp_nonextracted), ks, dmp_out);
      emit({{"table", dmp_out}});
    }
  } catch (const Error& e) {
    return fail(e.kind(), e.what(), 1);
  } catch (const fs::filesystem_error& e) {
    return fail("io", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
