// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "lixp/embedding_io.hpp"
#include "lixp/report.hpp"
#include "lixp/rng.hpp"

namespace lixp {

Method parse_method(std::string_view s) {
  if (s == "zero_shot") return Method::zero_shot;
  if (s == "prototypical") return Method::prototypical;
  if (s == "tip_adapter") return Method::tip_adapter;
  if (s == "cv_tip") return Method::cv_tip;
  if (s == "nn_plurality") return Method::nn_plurality;
  if (s == "nn_softmax") return Method::nn_softmax;
  if (s == "nn_rank") return Method::nn_rank;
  if (s == "snn_zero_shot") return Method::snn_zero_shot;
  throw std::invalid_argument("unknown method '" + std::string(s) +
                              "' (expected zero_shot|prototypical|tip_adapter|cv_tip|nn_plurality|nn_softmax|"
                              "nn_rank|snn_zero_shot)");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::zero_shot: return "zero_shot";
    case Method::prototypical: return "prototypical";
    case Method::tip_adapter: return "tip_adapter";
    case Method::cv_tip: return "cv_tip";
    case Method::nn_plurality: return "nn_plurality";
    case Method::nn_softmax: return "nn_softmax";
    case Method::nn_rank: return "nn_rank";
    case Method::snn_zero_shot: return "snn_zero_shot";
  }
  return "zero_shot";
}

Array2 classify(const ClassifierConfig& c, const Array2& test, const SupportSet* spt, const Array2& class_texts,
                std::uint64_t seed) {
  if (c.method == Method::zero_shot) return zero_shot_logits(test, class_texts);
  if (spt == nullptr) {
    throw std::invalid_argument(std::string(to_string(c.method)) + " needs a support set");
  }
  NnConfig nn = c.nn;
  switch (c.method) {
    case Method::zero_shot: break;
    case Method::prototypical: return prototypical_logits(test, build_prototypes(*spt));
    case Method::tip_adapter: return tip_adapter_logits(test, *spt, class_texts, c.tip);
    case Method::cv_tip:
      return tip_adapter_logits(test, *spt, class_texts, cv_tip_select(*spt, class_texts, c.cv_grid, c.cv_folds, seed));
    case Method::nn_plurality: nn.vote = Vote::plurality; return nn_vote_logits(test, *spt, nn);
    case Method::nn_softmax: nn.vote = Vote::softmax; return nn_vote_logits(test, *spt, nn);
    case Method::nn_rank: nn.vote = Vote::rank; return nn_vote_logits(test, *spt, nn);
    case Method::snn_zero_shot: return snn_plus_zeroshot_logits(test, *spt, class_texts, nn, c.mix_weight);
  }
  return zero_shot_logits(test, class_texts);
}

std::vector<Aggregate> ResultTable::aggregates() const {
  std::vector<Aggregate> out;
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> groups;
  for (const ResultRow& r : rows) {
    auto [it, inserted] = groups.try_emplace({r.classifier, r.shots});
    if (inserted) out.push_back(Aggregate{r.classifier, r.shots, r.num_classes, 0, 0.0, 0.0});
    it->second.push_back(r.accuracy);
  }
  for (Aggregate& a : out) {
    const auto& acc = groups.at({a.classifier, a.shots});
    a.episodes = acc.size();
    double s = 0.0;
    for (double v : acc) s += v;
    a.mean = s / static_cast<double>(acc.size());
    if (acc.size() > 1) {
      double ss = 0.0;
      for (double v : acc) ss += (v - a.mean) * (v - a.mean);
      a.stddev = std::sqrt(ss / static_cast<double>(acc.size() - 1));
    }
  }
  return out;
}

std::string ResultTable::to_csv() const {
  std::string out = csv_row({"classifier", "shots", "episode", "num_classes", "accuracy"});
  for (const ResultRow& r : rows) {
    out += csv_row({r.classifier, std::to_string(r.shots), std::to_string(r.episode), std::to_string(r.num_classes),
                    format_double(r.accuracy)});
  }
  return out;
}

std::string ResultTable::to_json() const {
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (const ResultRow& r : rows) {
    j["rows"].push_back({{"classifier", r.classifier},
                         {"shots", r.shots},
                         {"episode", r.episode},
                         {"num_classes", r.num_classes},
                         {"accuracy", r.accuracy}});
  }
  j["aggregates"] = nlohmann::ordered_json::array();
  for (const Aggregate& a : aggregates()) {
    j["aggregates"].push_back({{"classifier", a.classifier},
                               {"shots", a.shots},
                               {"num_classes", a.num_classes},
                               {"episodes", a.episodes},
                               {"mean", a.mean},
                               {"stddev", a.stddev}});
  }
  return j.dump(2) + "\n";
}

namespace {

std::size_t parse_count(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || s[0] == '-') {
    throw std::invalid_argument("bad " + what + " '" + s + "'");
  }
  return static_cast<std::size_t>(v);
}

double parse_real(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw std::invalid_argument("bad " + what + " '" + s + "'");
  return v;
}

}  // namespace

ResultTable ResultTable::from_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw std::invalid_argument("result CSV: empty input");
  const std::vector<std::string> header{"classifier", "shots", "episode", "num_classes", "accuracy"};
  if (rows[0] != header) throw std::invalid_argument("result CSV: expected header classifier,shots,episode,num_classes,accuracy");
  ResultTable t;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 5) {
      throw std::invalid_argument("result CSV: line " + std::to_string(i + 1) + " has " + std::to_string(r.size()) +
                                  " fields");
    }
    ResultRow row{r[0], parse_count(r[1], "shots"), parse_count(r[2], "episode"), parse_count(r[3], "num_classes"),
                  parse_real(r[4], "accuracy")};
    if (!(row.accuracy >= 0.0 && row.accuracy <= 1.0)) {
      throw std::invalid_argument("result CSV: accuracy out of [0, 1] on line " + std::to_string(i + 1));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

LabeledPool load_labeled_pool(const std::string& path) {
  EmbeddingFile f = import_embeddings(path);
  if (!f.labels) throw FormatError(path + ": pool file has no label block");
  return LabeledPool{row_normalized(f.embeddings, 1e-12), std::move(*f.labels)};
}

Array2 load_class_texts(const std::string& path) {
  const EmbeddingFile f = import_embeddings(path);
  if (f.labels) {
    for (std::size_t i = 0; i < f.labels->size(); ++i) {
      if ((*f.labels)[i] != static_cast<int>(i)) {
        throw FormatError(path + ": class text row " + std::to_string(i) + " is labeled " +
                          std::to_string((*f.labels)[i]));
      }
    }
  }
  return row_normalized(f.embeddings, 1e-12);
}

std::vector<std::size_t> sample_support(const std::vector<int>& labels, std::size_t num_classes, std::size_t shots,
                                        std::uint64_t seed) {
  const auto index = [&] {
    std::vector<std::vector<std::size_t>> idx(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
        throw std::invalid_argument("sample_support: label " + std::to_string(labels[i]) + " out of range");
      }
      idx[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    return idx;
  }();
  Rng rng(seed);
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (index[c].size() < shots) {
      throw std::invalid_argument("support pool has " + std::to_string(index[c].size()) + " rows for class " +
                                  std::to_string(c) + ", need " + std::to_string(shots));
    }
    for (std::size_t p : rng.sample_without_replacement(index[c].size(), shots)) out.push_back(index[c][p]);
  }
  return out;
}

ResultTable run_episodes(const EpisodeSpec& spec) {
  const std::size_t n = spec.class_texts.rows();
  if (n == 0) throw std::invalid_argument("run_episodes: no class texts");
  if (spec.classifiers.empty()) throw std::invalid_argument("run_episodes: no classifiers configured");
  if (spec.support_pool.labels.size() != spec.support_pool.embeddings.rows() ||
      spec.test_pool.labels.size() != spec.test_pool.embeddings.rows()) {
    throw std::invalid_argument("run_episodes: pools need one label per row");
  }
  for (int l : spec.test_pool.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n) {
      throw std::invalid_argument("run_episodes: test label " + std::to_string(l) + " out of range");
    }
  }
  // Fail before any work when a class cannot supply K supports.
  for (std::size_t k : spec.shots) {
    if (k > 0) (void)sample_support(spec.support_pool.labels, n, k, 0);
  }

  struct Task {
    std::size_t episode, shots;
  };
  std::vector<Task> tasks;
  for (std::size_t e = 0; e < spec.num_episodes; ++e) {
    for (std::size_t k : spec.shots) tasks.push_back({e, k});
  }
  std::vector<std::vector<ResultRow>> slots(tasks.size());

  const auto run_task = [&](std::size_t ti) {
    const Task& t = tasks[ti];
    const std::uint64_t episode_seed = derive_seed(spec.seed, stream::kEpisode, t.episode);
    std::optional<SupportSet> spt;
    if (t.shots > 0) {
      const auto rows = sample_support(spec.support_pool.labels, n, t.shots, derive_seed(episode_seed, t.shots));
      std::vector<int> labels;
      for (std::size_t r : rows) labels.push_back(spec.support_pool.labels[r]);
      spt = SupportSet::from_labels(select_rows(spec.support_pool.embeddings, rows), labels, n);
    }
    for (const ClassifierConfig& c : spec.classifiers) {
      if (t.shots == 0 && c.method != Method::zero_shot) continue;
      const Array2 logits = classify(c, spec.test_pool.embeddings, spt ? &*spt : nullptr, spec.class_texts,
                                     derive_seed(episode_seed, stream::kFolds, t.shots));
      slots[ti].push_back(ResultRow{std::string(to_string(c.method)), t.shots, t.episode, n,
                                    accuracy(logits, spec.test_pool.labels)});
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(spec.threads, tasks.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < tasks.size(); i = next++) run_task(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Merge in (shots, classifier, episode) order regardless of scheduling.
  ResultTable table;
  for (std::size_t k : spec.shots) {
    for (const ClassifierConfig& c : spec.classifiers) {
      for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
        if (tasks[ti].shots != k) continue;
        for (const ResultRow& r : slots[ti]) {
          if (r.classifier == to_string(c.method)) table.rows.push_back(r);
        }
      }
    }
  }
  return table;
}

LinearFit relative_gain_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw std::domain_error("relative_gain_fit: need at least 2 points");
  double mx = 0.0, my = 0.0;
  std::vector<double> xs;
  for (const auto& [n, g] : points) {
    if (!(n > 0.0)) throw std::domain_error("relative_gain_fit: example counts must be positive");
    xs.push_back(std::log10(n));
    mx += xs.back();
    my += g;
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (points[i].second - my);
  }
  const bool all_equal = std::ranges::all_of(points, [&](const auto& p) { return p.first == points[0].first; });
  if (all_equal || sxx == 0.0) throw std::domain_error("relative_gain_fit: singular fit (all example counts equal)");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

GainReport compare_runs(const ResultTable& baseline, const ResultTable& contextual) {
  const auto a = baseline.aggregates();
  const auto b = contextual.aggregates();
  std::set<std::pair<std::string, std::size_t>> ka, kb;
  for (const auto& x : a) ka.insert({x.classifier, x.shots});
  for (const auto& x : b) kb.insert({x.classifier, x.shots});
  if (ka != kb) throw std::invalid_argument("compare_runs: (classifier, shots) grids differ");

  GainReport report;
  std::vector<std::pair<double, double>> points;
  std::set<std::size_t> counts;
  for (const Aggregate& base : a) {
    const auto it = std::ranges::find_if(
        b, [&](const Aggregate& x) { return x.classifier == base.classifier && x.shots == base.shots; });
    if (it->num_classes != base.num_classes) {
      throw std::invalid_argument("compare_runs: class count differs for " + base.classifier);
    }
    if (base.mean == 0.0) {
      throw std::domain_error("compare_runs: zero baseline accuracy for " + base.classifier + " at K=" +
                              std::to_string(base.shots));
    }
    GainCell c{base.classifier, base.shots, base.num_classes, base.mean, it->mean,
               it->mean - base.mean, (it->mean - base.mean) / base.mean, base.shots * base.num_classes};
    if (c.shots > 0) {
      points.emplace_back(static_cast<double>(c.num_examples), c.relative_gain);
      counts.insert(c.num_examples);
    }
    report.cells.push_back(std::move(c));
  }
  if (counts.size() >= 2) report.fit = relative_gain_fit(points);
  return report;
}

std::string GainReport::to_csv() const {
  std::string out = csv_row({"classifier", "shots", "num_classes", "num_examples", "baseline", "contextual",
                             "absolute_gain", "relative_gain"});
  for (const GainCell& c : cells) {
    out += csv_row({c.classifier, std::to_string(c.shots), std::to_string(c.num_classes),
                    std::to_string(c.num_examples), format_double(c.baseline), format_double(c.contextual),
                    format_double(c.absolute_gain), format_double(c.relative_gain)});
  }
  return out;
}

std::string GainReport::to_json() const {
  nlohmann::ordered_json j;
  j["cells"] = nlohmann::ordered_json::array();
  for (const GainCell& c : cells) {
    j["cells"].push_back({{"classifier", c.classifier},
                          {"shots", c.shots},
                          {"num_classes", c.num_classes},
                          {"num_examples", c.num_examples},
                          {"baseline", c.baseline},
                          {"contextual", c.contextual},
                          {"absolute_gain", c.absolute_gain},
                          {"relative_gain", c.relative_gain}});
  }
  if (fit) {
    j["fit"] = {{"slope", fit->slope}, {"intercept", fit->intercept}};
  } else {
    j["fit"] = nullptr;
  }
  return j.dump(2) + "\n";
}

}  // namespace lixp
