// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "lixp/adapters.hpp"
#include "lixp/checkpoint.hpp"
#include "lixp/config.hpp"
#include "lixp/embedding_io.hpp"
#include "lixp/eval.hpp"
#include "lixp/gradcheck_suite.hpp"
#include "lixp/trainer.hpp"

namespace py = pybind11;
using namespace lixp;

namespace {

using InArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array2 to_array2(const InArray& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Array2(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

py::array_t<double> to_numpy(const Array2& a) {
  py::array_t<double> out({a.rows(), a.cols()});
  std::copy(a.data().begin(), a.data().end(), out.mutable_data());
  return out;
}

SupportSet support_set(const InArray& support, const std::vector<int>& labels, std::size_t num_classes) {
  return SupportSet::from_labels(to_array2(support), labels, num_classes);
}

py::dict record_dict(const LogRecord& r) {
  py::dict d;
  d["step"] = r.step;
  d["base_term"] = r.base_term;
  d["ctx_term"] = r.ctx_term;
  d["total"] = r.total;
  d["tau1"] = r.tau1;
  d["tau2"] = r.tau2;
  d["tau_ctx"] = r.tau_ctx;
  d["bias"] = r.bias;
  d["grad_norm"] = r.grad_norm;
  return d;
}

py::dict store_dict(const ParameterStore& store) {
  py::dict d;
  for (const auto& e : store.entries()) d[py::str(e.name)] = to_numpy(e.value);
  return d;
}

ParameterStore dict_store(const py::dict& d) {
  ParameterStore store;
  for (const auto& [k, v] : d) store.add(py::cast<std::string>(k), to_array2(py::cast<InArray>(v)));
  return store;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Contrastive training with in-batch contextualization and training-free few-shot adapters.";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  m.def(
      "read_embeddings",
      [](const std::string& path) {
        const EmbeddingFile f = import_embeddings(path);
        return py::make_tuple(to_numpy(f.embeddings), f.labels);
      },
      py::arg("path"), "Reads a LIXPEMB1 file; returns (embeddings, labels or None).");
  m.def(
      "write_embeddings",
      [](const std::string& path, const InArray& embeddings, std::optional<std::vector<int>> labels) {
        export_embeddings(to_array2(embeddings), labels ? &*labels : nullptr, path);
      },
      py::arg("path"), py::arg("embeddings"), py::arg("labels") = py::none(),
      "Writes a LIXPEMB1 file (values stored as float32).");
  m.def(
      "read_checkpoint", [](const std::string& path) { return store_dict(load_checkpoint(path)); }, py::arg("path"),
      "Reads a LIXPCKPT file into an ordered name -> array dict.");
  m.def(
      "write_checkpoint", [](const std::string& path, const py::dict& params) { save_checkpoint(dict_store(params), path); },
      py::arg("path"), py::arg("params"), "Writes a name -> 2-D array dict as a LIXPCKPT file.");

  m.def(
      "zero_shot_logits", [](const InArray& test, const InArray& texts) {
        return to_numpy(zero_shot_logits(to_array2(test), to_array2(texts)));
      },
      py::arg("test"), py::arg("class_texts"));
  m.def(
      "prototypical_logits",
      [](const InArray& test, const InArray& support, const std::vector<int>& labels, std::size_t num_classes) {
        return to_numpy(prototypical_logits(to_array2(test), build_prototypes(support_set(support, labels, num_classes))));
      },
      py::arg("test"), py::arg("support"), py::arg("labels"), py::arg("num_classes"));
  m.def(
      "tip_adapter_logits",
      [](const InArray& test, const InArray& support, const std::vector<int>& labels, const InArray& texts, double mix,
         double sharpness) {
        const Array2 t = to_array2(texts);
        return to_numpy(tip_adapter_logits(to_array2(test), support_set(support, labels, t.rows()), t,
                                           TipConfig{mix, sharpness}));
      },
      py::arg("test"), py::arg("support"), py::arg("labels"), py::arg("class_texts"), py::arg("mix") = 1.0,
      py::arg("sharpness") = 5.5);
  m.def(
      "nn_vote_logits",
      [](const InArray& test, const InArray& support, const std::vector<int>& labels, std::size_t num_classes,
         std::size_t k, const std::string& vote, double softmax_temp, double rank_offset) {
        NnConfig cfg{k, softmax_temp, rank_offset, parse_vote(vote)};
        return to_numpy(nn_vote_logits(to_array2(test), support_set(support, labels, num_classes), cfg));
      },
      py::arg("test"), py::arg("support"), py::arg("labels"), py::arg("num_classes"), py::arg("k") = 32,
      py::arg("vote") = "softmax", py::arg("softmax_temp") = 0.07, py::arg("rank_offset") = 2.0);
  m.def(
      "snn_plus_zeroshot_logits",
      [](const InArray& test, const InArray& support, const std::vector<int>& labels, const InArray& texts,
         double mix_weight, std::size_t k, double softmax_temp) {
        const Array2 t = to_array2(texts);
        NnConfig cfg;
        cfg.k = k;
        cfg.softmax_temp = softmax_temp;
        return to_numpy(
            snn_plus_zeroshot_logits(to_array2(test), support_set(support, labels, t.rows()), t, cfg, mix_weight));
      },
      py::arg("test"), py::arg("support"), py::arg("labels"), py::arg("class_texts"), py::arg("mix_weight") = 1.0,
      py::arg("k") = 32, py::arg("softmax_temp") = 0.07);
  m.def(
      "accuracy", [](const InArray& logits, const std::vector<int>& labels) {
        return accuracy(to_array2(logits), labels);
      },
      py::arg("logits"), py::arg("labels"));

  m.def(
      "run_episodes",
      [](const InArray& support, const std::vector<int>& support_labels, const InArray& test,
         const std::vector<int>& test_labels, const InArray& texts, std::vector<std::size_t> shots,
         std::size_t episodes, std::uint64_t seed, const std::vector<std::string>& methods, std::size_t threads) {
        EpisodeSpec spec;
        spec.support_pool = {to_array2(support), support_labels};
        spec.test_pool = {to_array2(test), test_labels};
        spec.class_texts = to_array2(texts);
        spec.shots = std::move(shots);
        spec.num_episodes = episodes;
        spec.seed = seed;
        spec.threads = threads;
        for (const auto& name : methods) {
          ClassifierConfig c;
          c.method = parse_method(name);
          spec.classifiers.push_back(c);
        }
        ResultTable table;
        {
          py::gil_scoped_release release;
          table = run_episodes(spec);
        }
        return table.to_csv();
      },
      py::arg("support"), py::arg("support_labels"), py::arg("test"), py::arg("test_labels"), py::arg("class_texts"),
      py::arg("shots") = std::vector<std::size_t>{1}, py::arg("episodes") = 5, py::arg("seed") = 0,
      py::arg("methods") = std::vector<std::string>{"zero_shot", "prototypical"}, py::arg("threads") = 1,
      "Runs few-shot episodes and returns the per-episode CSV report.");

  m.def(
      "relative_gain_fit",
      [](const std::vector<double>& num_examples, const std::vector<double>& gains) {
        if (num_examples.size() != gains.size()) throw py::value_error("num_examples and gains differ in length");
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < gains.size(); ++i) pts.emplace_back(num_examples[i], gains[i]);
        const LinearFit f = relative_gain_fit(pts);
        return py::make_tuple(f.slope, f.intercept);
      },
      py::arg("num_examples"), py::arg("gains"), "Least-squares (slope, intercept) of gain on log10(num_examples).");

  m.def(
      "train",
      [](const std::string& config_text) {
        const ExperimentConfig cfg = parse_experiment_config(config_text);
        TrainResult r;
        {
          py::gil_scoped_release release;
          const ExperimentData d = make_experiment_data(cfg);
          r = train(cfg.make_model(), d.train_images, d.train_texts, cfg.lixp, cfg.train);
        }
        py::list log;
        for (const auto& rec : r.log.records) log.append(record_dict(rec));
        return py::make_tuple(store_dict(r.params), log);
      },
      py::arg("config_text"), "Trains from key=value configuration text; returns (params, log records).");

  m.def(
      "gradcheck_suite",
      [](std::size_t seeds, double tolerance) {
        GradcheckSuiteResult r;
        {
          py::gil_scoped_release release;
          r = run_gradcheck_suite(GradcheckSuiteOptions{seeds, tolerance, 1e-5});
        }
        py::list out;
        for (const auto& c : r.cases) {
          py::dict d;
          d["name"] = c.name;
          d["max_rel_error"] = c.max_rel_error;
          d["frozen_ok"] = c.frozen_ok;
          d["passed"] = c.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("seeds") = 20, py::arg("tolerance") = 1e-4);
}
