// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lixp/checkpoint.hpp"
#include "lixp/config.hpp"
#include "lixp/embedding_io.hpp"
#include "lixp/eval.hpp"
#include "lixp/gradcheck_suite.hpp"
#include "lixp/report.hpp"
#include "lixp/trainer.hpp"

namespace {

using namespace lixp;

void print_record(const char* label, const LogRecord& r) {
  std::printf("%s step %zu: total %.6f base %.6f ctx %.6f tau1 %.4g tau2 %.4g tau_ctx %.4g bias %.4g\n", label, r.step,
              r.total, r.base_term, r.ctx_term, r.tau1, r.tau2, r.tau_ctx, r.bias);
}

struct TrainArgs {
  std::string config;
  std::string resume;
  std::string checkpoint;
  std::string log;
};

int run_train(const TrainArgs& a) {
  const ExperimentConfig cfg = load_experiment_config(a.config);
  const std::string ckpt_path = a.checkpoint.empty() ? cfg.checkpoint_path : a.checkpoint;
  const std::string log_path = a.log.empty() ? cfg.log_path : a.log;
  const ExperimentData data = make_experiment_data(cfg);
  const DualEncoder model = cfg.make_model();
  std::optional<ParameterStore> initial;
  if (!a.resume.empty()) initial = load_checkpoint(a.resume);
  try {
    const TrainResult res = train(model, data.train_images, data.train_texts, cfg.lixp, cfg.train, std::move(initial));
    save_checkpoint(res.params, ckpt_path);
    write_text_file(log_path, train_log_csv(res.log));
    if (!res.log.records.empty()) {
      print_record("first", res.log.records.front());
      print_record("last", res.log.records.back());
    }
    std::printf("wrote %s and %s\n", ckpt_path.c_str(), log_path.c_str());
    return 0;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    if (e.last_record()) print_record("last finite", *e.last_record());
    return 2;
  }
}

struct SweepArgs {
  std::string config;
  std::vector<std::string> inits;
  std::string prefix = "tau_ctx_sweep";
};

int run_sweep(const SweepArgs& a) {
  const ExperimentConfig cfg = load_experiment_config(a.config);
  std::vector<double> inits;
  for (const std::string& s : a.inits) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("bad --inits value '" + s + "'");
    inits.push_back(v);
  }
  const ExperimentData data = make_experiment_data(cfg);
  const auto logs = tau_ctx_sweep(inits, cfg.make_model(), data.train_images, data.train_texts, cfg.lixp, cfg.train);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const std::string path = a.prefix + "_" + a.inits[i] + ".csv";
    write_text_file(path, train_log_csv(logs[i]));
    const LogRecord& last = logs[i].records.back();
    std::printf("tau_ctx init %s -> final %.6g  (%s)\n", a.inits[i].c_str(), last.tau_ctx, path.c_str());
  }
  return 0;
}

struct ExportArgs {
  std::string ckpt;
  std::string data;
  std::string out;
  std::string split = "test";
};

int run_export(const ExportArgs& a) {
  const ExperimentConfig cfg = load_experiment_config(a.data);
  const ParameterStore params = load_checkpoint(a.ckpt);
  const DualEncoder model = cfg.make_model();
  const ExperimentData data = make_experiment_data(cfg);
  Array2 emb;
  std::vector<int> labels;
  if (a.split == "texts") {
    emb = embed_texts(model, params, data.pairs.class_texts);
    for (std::size_t c = 0; c < cfg.task.num_classes; ++c) labels.push_back(static_cast<int>(c));
  } else {
    const std::vector<std::size_t>* rows = nullptr;
    if (a.split == "support") rows = &data.split.support;
    if (a.split == "test") rows = &data.split.test;
    if (a.split == "train") rows = &data.split.train;
    if (rows == nullptr) throw std::invalid_argument("--split must be support|test|train|texts");
    emb = embed_images(model, params, select_rows(data.pairs.images, *rows));
    labels = select_labels(data.pairs.labels, *rows);
  }
  export_embeddings(emb, &labels, a.out);
  std::printf("wrote %zu x %zu %s embeddings to %s\n", emb.rows(), emb.cols(), a.split.c_str(), a.out.c_str());
  return 0;
}

void write_table(const ResultTable& t, const std::string& csv, const std::string& json) {
  if (!csv.empty()) write_text_file(csv, t.to_csv());
  if (!json.empty()) write_text_file(json, t.to_json());
  for (const Aggregate& g : t.aggregates()) {
    std::printf("%-14s K=%-3zu N=%-3zu acc %.4f +- %.4f (%zu episodes)\n", g.classifier.c_str(), g.shots, g.num_classes,
                g.mean, g.stddev, g.episodes);
  }
  if (csv.empty() && json.empty()) std::fputs(t.to_csv().c_str(), stdout);
}

struct AdaptArgs {
  std::string support, test, texts, method = "prototypical", csv, json;
  std::size_t shots = 1, episodes = 1, threads = 1;
  std::uint64_t seed = 0;
  ClassifierConfig classifier;
};

int run_adapt(AdaptArgs a) {
  EpisodeSpec spec;
  spec.support_pool = load_labeled_pool(a.support);
  spec.test_pool = load_labeled_pool(a.test);
  spec.class_texts = load_class_texts(a.texts);
  spec.shots = {a.shots};
  spec.num_episodes = a.episodes;
  spec.seed = a.seed;
  spec.threads = a.threads;
  a.classifier.method = parse_method(a.method);
  spec.classifiers = {a.classifier};
  write_table(run_episodes(spec), a.csv, a.json);
  return 0;
}

int run_episodes_cmd(const std::string& spec_path, std::size_t threads_override) {
  const EpisodeFileSpec f = load_episode_config(spec_path);
  EpisodeSpec spec;
  spec.support_pool = load_labeled_pool(f.support_path);
  spec.test_pool = load_labeled_pool(f.test_path);
  spec.class_texts = load_class_texts(f.texts_path);
  spec.shots = f.shots;
  spec.num_episodes = f.num_episodes;
  spec.seed = f.seed;
  spec.threads = threads_override > 0 ? threads_override : f.threads;
  spec.classifiers = f.classifiers;
  write_table(run_episodes(spec), f.csv_path, f.json_path);
  return 0;
}

int run_compare(const std::string& base, const std::string& ctx, const std::string& csv, const std::string& json) {
  const GainReport rep =
      compare_runs(ResultTable::from_csv(read_text_file(base)), ResultTable::from_csv(read_text_file(ctx)));
  if (!csv.empty()) write_text_file(csv, rep.to_csv());
  if (!json.empty()) write_text_file(json, rep.to_json());
  if (csv.empty()) std::fputs(rep.to_csv().c_str(), stdout);
  if (rep.fit) {
    std::printf("fit: relative_gain = %.6g * log10(num_examples) + %.6g\n", rep.fit->slope, rep.fit->intercept);
  } else {
    std::printf("fit: not available (fewer than two distinct example counts with K > 0)\n");
  }
  return 0;
}

int run_gradcheck_cmd(std::size_t seeds, double tolerance) {
  const GradcheckSuiteResult r = run_gradcheck_suite(GradcheckSuiteOptions{seeds, tolerance, 1e-5});
  for (const GradcheckCaseResult& c : r.cases) {
    std::printf("%-4s %-42s max rel err %.3e (worst seed %llu)%s\n", c.passed ? "ok" : "FAIL", c.name.c_str(),
                c.max_rel_error, static_cast<unsigned long long>(c.worst_seed),
                c.frozen_ok ? "" : " frozen-gradient violation");
  }
  std::printf("%zu cases x %zu seeds in %.2fs: %s\n", r.cases.size(), seeds, r.seconds, r.passed() ? "PASS" : "FAIL");
  return r.passed() ? 0 : 1;
}

void add_classifier_options(CLI::App* cmd, ClassifierConfig& c) {
  cmd->add_option("--tip-mix", c.tip.mix, "Tip-Adapter cache weight")->capture_default_str();
  cmd->add_option("--tip-sharpness", c.tip.sharpness, "Tip-Adapter sharpness")->capture_default_str();
  cmd->add_option("--nn-k", c.nn.k, "Neighbours for NN voting (capped at support size)")->capture_default_str();
  cmd->add_option("--nn-softmax-temp", c.nn.softmax_temp, "Softmax voting temperature")->capture_default_str();
  cmd->add_option("--nn-rank-offset", c.nn.rank_offset, "Rank voting offset")->capture_default_str();
  cmd->add_option("--snn-mix", c.mix_weight, "Zero-shot weight in snn_zero_shot")->capture_default_str();
  cmd->add_option("--cv-folds", c.cv_folds, "Folds for cv_tip")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lixp: context-aware contrastive pretraining and few-shot adaptation lab"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a dual encoder; writes a checkpoint and a TrainLog CSV");
  train_cmd->add_option("--config", train_args.config, "Experiment config (key=value)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--resume", train_args.resume, "Checkpoint to start from")->check(CLI::ExistingFile);
  train_cmd->add_option("--checkpoint", train_args.checkpoint, "Output checkpoint (default: output.checkpoint)");
  train_cmd->add_option("--log", train_args.log, "Output TrainLog CSV (default: output.log)");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep-tau", "Train once per tau_ctx init; one trajectory CSV each");
  sweep_cmd->add_option("--config", sweep_args.config, "Experiment config")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--inits", sweep_args.inits, "Comma-separated tau_ctx inits")->required()->delimiter(',');
  sweep_cmd->add_option("--prefix", sweep_args.prefix, "Output path prefix; files are <prefix>_<init>.csv")
      ->capture_default_str();

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export-embeddings", "Embed a data split with a checkpoint (LIXPEMB1)");
  export_cmd->add_option("--ckpt", export_args.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--data", export_args.data, "Experiment config describing task, split and encoders")
      ->required()
      ->check(CLI::ExistingFile);
  export_cmd->add_option("--out", export_args.out, "Output embedding file")->required();
  export_cmd->add_option("--split", export_args.split, "support|test|train|texts")
      ->capture_default_str()
      ->check(CLI::IsMember({"support", "test", "train", "texts"}));

  AdaptArgs adapt_args;
  auto* adapt_cmd = app.add_subcommand("adapt", "Few-shot classification with one method");
  adapt_cmd->add_option("--support", adapt_args.support, "Labeled support pool")->required()->check(CLI::ExistingFile);
  adapt_cmd->add_option("--test", adapt_args.test, "Labeled test pool")->required()->check(CLI::ExistingFile);
  adapt_cmd->add_option("--texts", adapt_args.texts, "Class text embeddings")->required()->check(CLI::ExistingFile);
  adapt_cmd->add_option("--method", adapt_args.method,
                        "zero_shot|prototypical|tip_adapter|cv_tip|nn_plurality|nn_softmax|nn_rank|snn_zero_shot")
      ->required();
  adapt_cmd->add_option("--shots", adapt_args.shots, "Supports per class (0 = zero-shot only)")->required();
  adapt_cmd->add_option("--seed", adapt_args.seed, "Root seed")->capture_default_str();
  adapt_cmd->add_option("--episodes", adapt_args.episodes, "Support resamples")->capture_default_str();
  adapt_cmd->add_option("--threads", adapt_args.threads, "Worker threads")->capture_default_str();
  adapt_cmd->add_option("--csv", adapt_args.csv, "ResultTable CSV output");
  adapt_cmd->add_option("--json", adapt_args.json, "ResultTable JSON output");
  add_classifier_options(adapt_cmd, adapt_args.classifier);

  std::string spec_path;
  std::size_t episode_threads = 0;
  auto* episodes_cmd = app.add_subcommand("episodes", "Run an episodic evaluation spec");
  episodes_cmd->add_option("--spec", spec_path, "Episode spec (key=value)")->required()->check(CLI::ExistingFile);
  episodes_cmd->add_option("--threads", episode_threads, "Override worker threads");

  std::string baseline, contextual, cmp_csv, cmp_json;
  auto* compare_cmd = app.add_subcommand("compare", "Per-cell gains and the log-linear relative-gain fit");
  compare_cmd->add_option("--baseline", baseline, "Baseline ResultTable CSV")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--contextual", contextual, "Contextual ResultTable CSV")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--csv", cmp_csv, "Gain report CSV output");
  compare_cmd->add_option("--json", cmp_json, "Gain report JSON output");

  std::size_t gc_seeds = 20;
  double gc_tol = 1e-4;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite; nonzero exit on failure");
  gradcheck_cmd->add_option("--seeds", gc_seeds, "Random instances per case")->capture_default_str();
  gradcheck_cmd->add_option("--tolerance", gc_tol, "Max relative error")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(train_args);
    if (*sweep_cmd) return run_sweep(sweep_args);
    if (*export_cmd) return run_export(export_args);
    if (*adapt_cmd) return run_adapt(adapt_args);
    if (*episodes_cmd) return run_episodes_cmd(spec_path, episode_threads);
    if (*compare_cmd) return run_compare(baseline, contextual, cmp_csv, cmp_json);
    if (*gradcheck_cmd) return run_gradcheck_cmd(gc_seeds, gc_tol);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
