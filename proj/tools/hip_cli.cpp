// SPDX-License-Identifier: Apache-2.0
//
// hip: prepare, train, eval, predict, gradcheck, synth.

#include "hip/checks.hpp"
#include "hip/config.hpp"
#include "hip/evaluator.hpp"
#include "hip/pipeline.hpp"
#include "hip/reasoner.hpp"
#include "hip/synth.hpp"
#include "hip/tkg_store.hpp"
#include "hip/trainer.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>

namespace fs = std::filesystem;

namespace {

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kMissingFile = 3,
  kBadConfig = 4,
  kBadCheckpoint = 5,
};

struct CliError : std::runtime_error {
  CliError(int code, const std::string& message) : std::runtime_error(message), code(code) {}
  int code;
};

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw CliError(kMissingFile, what + " not found: " + path.string());
}

// Every TrainConfig key as a --kebab-case flag; values go through
// apply_setting so the file and flag syntax agree.
const std::vector<std::string> kTrainKeys = {
    "learning_rate", "batch_size",       "window",        "channels",
    "layers",        "dim",              "epochs",        "dropout",
    "composition",   "normalization",    "layer_activation", "retain_absent", "normalize_embeddings",
    "seed",          "loss_terms",       "vocabulary_scope", "binarize_vocabulary",
    "topk",          "filter_mode",      "feedback_mode", "score_mode",
    "both_directions", "validate_every"};

const std::vector<std::string> kReasoningKeys = {"topk",       "filter_mode", "feedback_mode",
                                                 "score_mode", "both_directions",
                                                 "vocabulary_scope", "binarize_vocabulary"};

std::string kebab(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return key;
}

struct SettingFlags {
  std::map<std::string, std::string> values;

  void attach(CLI::App* app, const std::vector<std::string>& keys) {
    for (const std::string& key : keys) {
      std::string names = "--" + kebab(key);
      if (key == "learning_rate") names += ",--lr";
      app->add_option(names, values[key]);
    }
  }

  void apply(hip::TrainConfig& config) const {
    try {
      for (const auto& [key, value] : values)
        if (!value.empty()) hip::apply_setting(config, key, value);
      config.validate();
    } catch (const std::invalid_argument& e) {
      throw CliError(kBadConfig, std::string("invalid setting: ") + e.what());
    }
  }
};

hip::TrainConfig load_config(const std::string& file, const SettingFlags& flags) {
  hip::TrainConfig config;
  if (!file.empty()) {
    require_file(file, "config file");
    try {
      config = hip::read_config(file);
    } catch (const std::invalid_argument& e) {
      throw CliError(kBadConfig, std::string("malformed config: ") + e.what());
    }
  }
  flags.apply(config);
  return config;
}

hip::DatasetBundle load_data(const std::string& dir) {
  require_file(dir, "dataset directory");
  return hip::load_dataset(dir);
}

hip::Checkpoint load_ckpt(const std::string& path) {
  require_file(path, "checkpoint");
  try {
    return hip::load_checkpoint(path);
  } catch (const hip::CheckpointVersionError& e) {
    throw CliError(kBadCheckpoint, std::string("checkpoint version mismatch: ") + e.what());
  } catch (const std::runtime_error& e) {
    throw CliError(kBadCheckpoint, std::string("unreadable checkpoint: ") + e.what());
  }
}

hip::HipModel model_from(const hip::Checkpoint& c, const hip::DatasetBundle& data,
                         const hip::TrainConfig& config) {
  if (c.num_entities != data.num_entities || c.num_relations != data.num_relations)
    throw CliError(kBadCheckpoint, "checkpoint was trained on " + std::to_string(c.num_entities) +
                                       " entities / " + std::to_string(c.num_relations) +
                                       " relations, dataset has " +
                                       std::to_string(data.num_entities) + " / " +
                                       std::to_string(data.num_relations));
  hip::HipModel model(config, c.num_entities, c.num_relations);
  model.parameters() = c.parameters;
  return model;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError(kFailure, "cannot write " + path.string());
  out << text;
}

// ---- verbs ---------------------------------------------------------------

int run_prepare(const std::string& dir, int min_events, long long train_span,
                long long test_span, const std::string& out) {
  hip::DatasetBundle data = load_data(dir);
  if (min_events > 0) {
    data = hip::subsample_by_activity(data, min_events, train_span, test_span);
  }
  std::set<hip::Timestamp> times;
  for (const auto* split : {&data.train, &data.valid, &data.test})
    for (const auto& q : *split) times.insert(q.time);
  std::cout << "entities=" << data.num_entities << " relations=" << data.num_relations
            << " train=" << data.train.size() << '\n'
            << "valid=" << data.valid.size() << " test=" << data.test.size()
            << " timestamps=" << times.size() << " time_gap=" << data.time_gap << '\n';
  if (!out.empty()) {
    hip::write_dataset(out, data);
    std::cout << "wrote " << out << '\n';
  }
  return kOk;
}

int run_train(const std::string& dir, const std::string& config_file, const SettingFlags& flags,
              const std::string& checkpoint, const std::string& log_file,
              const std::string& resume) {
  const hip::DatasetBundle data = load_data(dir);
  hip::TrainConfig config;
  std::optional<hip::Checkpoint> start;
  if (!resume.empty()) {
    start = load_ckpt(resume);
    config = start->config;
    flags.apply(config);
  } else {
    config = load_config(config_file, flags);
  }

  hip::HipModel model(config, data.num_entities, data.num_relations);
  hip::Trainer trainer(model);
  if (start) {
    model = model_from(*start, data, config);
    trainer.optimizer() = start->optimizer;
    trainer.optimizer().config.learning_rate = config.learning_rate;
    trainer.set_epoch(static_cast<int>(start->epoch));
  } else {
    model.initialize(config.seed);
  }

  std::ofstream log;
  if (!log_file.empty()) {
    log.open(log_file, start ? std::ios::app : std::ios::trunc);
    if (!log) throw CliError(kFailure, "cannot write log " + log_file);
    if (!start) hip::write_log_header(log);
  }
  const auto result = hip::fit(trainer, data, [&](const hip::EpochMetrics& m) {
    std::cerr << "epoch " << m.epoch << " loss " << m.loss << " (" << m.seconds << "s)\n";
    if (log) {
      hip::write_log_row(log, m);
      log.flush();
    }
  });
  if (result.best_valid_mrr)
    std::cerr << "best validation MRR " << *result.best_valid_mrr << " at epoch "
              << result.best_epoch << '\n';

  hip::Checkpoint c{config, data.num_entities, data.num_relations,
                    static_cast<std::uint64_t>(trainer.epoch()), model.parameters(),
                    trainer.optimizer()};
  hip::save_checkpoint(c, checkpoint);
  std::cout << "saved " << checkpoint << " after epoch " << trainer.epoch() << '\n';
  return kOk;
}

int run_eval(const std::string& dir, const std::string& checkpoint, const SettingFlags& flags,
             const std::string& split_name, const std::string& json_out,
             const std::string& csv_out, bool baseline) {
  const hip::DatasetBundle data = load_data(dir);
  const hip::Split split = split_name == "valid" ? hip::Split::Valid : hip::Split::Test;
  hip::Evaluation e;
  if (baseline) {
    hip::TrainConfig config;
    flags.apply(config);
    e = hip::evaluate_frequency(data, split, config.filter_mode, config.both_directions);
  } else {
    if (checkpoint.empty()) throw CliError(kUsage, "eval needs --checkpoint (or --baseline)");
    const hip::Checkpoint c = load_ckpt(checkpoint);
    hip::TrainConfig config = c.config;
    flags.apply(config);
    const hip::HipModel model = model_from(c, data, config);
    e = hip::evaluate_split(model, data, split);
  }
  auto to_raw = [&](hip::Timestamp t) { return data.to_raw(t); };
  const std::string json = hip::to_json(e.report, to_raw);
  if (json_out.empty()) std::cout << json;
  else write_text(json_out, json);
  if (!csv_out.empty()) {
    std::ofstream csv(csv_out);
    if (!csv) throw CliError(kFailure, "cannot write " + csv_out);
    hip::write_csv(csv, e.report, to_raw);
  }
  return kOk;
}

int run_predict(const std::string& dir, const std::string& checkpoint, const SettingFlags& flags,
                const std::string& query_file, const std::string& out) {
  const hip::DatasetBundle data = load_data(dir);
  const hip::Checkpoint c = load_ckpt(checkpoint);
  hip::TrainConfig config = c.config;
  flags.apply(config);
  const hip::HipModel model = model_from(c, data, config);
  require_file(query_file, "query file");
  const auto queries = hip::read_query_file(query_file, data);

  std::vector<hip::Quadruple> history = data.train;
  history.insert(history.end(), data.valid.begin(), data.valid.end());
  hip::TemporalGraphStore store(data.num_entities, data.num_relations);
  for (auto& g : hip::build_snapshots(history, data.num_relations)) store.append(std::move(g));
  const auto revealed = hip::build_snapshots(data.test, data.num_relations);
  const auto answers = hip::reason(model, store, queries, hip::reasoner_options(config), revealed);

  hip::FilterIndex filter(config.filter_mode, data.num_relations);
  filter.add(data.train);
  filter.add(data.valid);
  filter.add(data.test);
  std::vector<std::optional<int>> ranks;
  for (const auto& a : answers)
    ranks.push_back(a.query.truth ? std::optional<int>(hip::filtered_rank(
                                        a.scores, *a.query.truth, filter.filter_for(a.query)))
                                  : std::nullopt);
  hip::write_predictions(out, answers, ranks, [&](hip::Timestamp t) { return data.to_raw(t); });
  std::cout << "wrote " << answers.size() << " predictions to " << out << '\n';
  return kOk;
}

int run_gradcheck(const std::string& suite, double tolerance) {
  std::vector<hip::ad::GradcheckReport> reports;
  if (suite == "primitives") reports = hip::checks::primitive_suites();
  else if (suite == "models") reports = hip::checks::model_suites();
  else if (suite == "loss") reports = hip::checks::loss_suites();
  else if (suite == "all") reports = hip::checks::all_suites();
  else throw CliError(kUsage, "unknown gradcheck suite '" + suite + "'");
  int failed = 0;
  for (const auto& r : reports) {
    const bool ok = r.passed(tolerance);
    failed += !ok;
    std::cout << (ok ? "PASS " : "FAIL ") << r.name << " max_rel_err=" << r.max_error() << '\n';
  }
  std::cout << reports.size() - static_cast<std::size_t>(failed) << "/" << reports.size()
            << " suites within " << tolerance << '\n';
  return failed == 0 ? kOk : kFailure;
}

int run_synth(const std::string& kind, const std::string& out, std::uint64_t seed, int entities,
              int relations, long long timestamps, int events, long long test_steps) {
  hip::DatasetBundle data;
  if (kind == "cyclic") data = hip::cyclic_chain_tkg(seed);
  else if (kind == "random")
    data = hip::random_tkg(entities, relations, timestamps, events, test_steps, seed);
  else throw CliError(kUsage, "unknown synth kind '" + kind + "'");
  hip::write_dataset(out, data);
  std::cout << "entities=" << data.num_entities << " relations=" << data.num_relations
            << " train=" << data.train.size() << " test=" << data.test.size() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal knowledge graph extrapolation"};
  app.require_subcommand(1);

  std::string data_dir, config_file, checkpoint, log_file, resume, split = "test", json_out,
                                                                    csv_out, queries, out;
  SettingFlags train_flags, eval_flags, predict_flags, baseline_flags;
  bool baseline = false;
  int min_events = 0;
  long long train_span = 60, test_span = 10;

  auto* prepare = app.add_subcommand("prepare", "validate a dataset and print its statistics");
  prepare->add_option("--data", data_dir, "dataset directory")->required();
  prepare->add_option("--min-events", min_events, "keep entities with at least this many events");
  prepare->add_option("--train-span", train_span, "timestamps kept for training when subsampling");
  prepare->add_option("--test-span", test_span, "timestamps kept for testing when subsampling");
  prepare->add_option("--out", out, "write the (subsampled) dataset here");

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--config", config_file, "key=value config file");
  train->add_option("--checkpoint", checkpoint, "output checkpoint")->required();
  train->add_option("--log", log_file, "CSV training log");
  train->add_option("--resume", resume, "continue from this checkpoint");
  train_flags.attach(train, kTrainKeys);

  auto* eval = app.add_subcommand("eval", "filtered MRR and Hits@k on a split");
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--checkpoint", checkpoint, "trained checkpoint");
  eval->add_option("--split", split, "test or valid")->check(CLI::IsMember({"test", "valid"}));
  eval->add_option("--out", json_out, "metric JSON (stdout when omitted)");
  eval->add_option("--csv", csv_out, "per-timestamp CSV");
  eval->add_flag("--baseline", baseline, "score with the frequency baseline instead");
  eval_flags.attach(eval, kReasoningKeys);

  auto* predict = app.add_subcommand("predict", "rank objects for a query file");
  predict->add_option("--data", data_dir, "dataset directory")->required();
  predict->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  predict->add_option("--queries", queries, "query file")->required();
  predict->add_option("--out", out, "prediction file")->required();
  predict_flags.attach(predict, kReasoningKeys);

  std::string suite = "all";
  double tolerance = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suites");
  gradcheck->add_option("--suite", suite, "primitives, models, loss or all");
  gradcheck->add_option("--tolerance", tolerance, "maximum relative error");

  std::string kind = "cyclic";
  std::uint64_t seed = 7;
  int entities = 30, relations = 3, events = 20;
  long long timestamps = 20, test_steps = 3;
  auto* synth = app.add_subcommand("synth", "write a seeded synthetic dataset");
  synth->add_option("--kind", kind, "cyclic or random");
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--entities", entities, "random: entity count");
  synth->add_option("--relations", relations, "random: relation count");
  synth->add_option("--timestamps", timestamps, "random: timestamp count");
  synth->add_option("--events", events, "random: events per timestamp");
  synth->add_option("--test-steps", test_steps, "random: held-out timestamps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (app.get_subcommands().empty() && argc > 1 && argv[1][0] != '-') {
      std::cerr << "error: unknown verb '" << argv[1] << "'\n" << app.help();
      return kUsage;
    }
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*prepare) return run_prepare(data_dir, min_events, train_span, test_span, out);
    if (*train) return run_train(data_dir, config_file, train_flags, checkpoint, log_file, resume);
    if (*eval) return run_eval(data_dir, checkpoint, eval_flags, split, json_out, csv_out, baseline);
    if (*predict) return run_predict(data_dir, checkpoint, predict_flags, queries, out);
    if (*gradcheck) return run_gradcheck(suite, tolerance);
    if (*synth)
      return run_synth(kind, out, seed, entities, relations, timestamps, events, test_steps);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
