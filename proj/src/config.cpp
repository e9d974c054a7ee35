// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "lixp/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>

#include "lixp/report.hpp"
#include "lixp/rng.hpp"

namespace lixp {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(std::string_view(s).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(to_u64(s)); }

double to_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (s.empty() || pos != s.size() || !std::isfinite(v)) {
    throw std::invalid_argument("expected a finite number, got '" + s + "'");
  }
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("expected true|false, got '" + s + "'");
}

std::vector<std::size_t> to_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const std::string& p : split_list(s)) out.push_back(to_size(p));
  return out;
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

std::string from_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

using FieldMap = std::map<std::string, Field, std::less<>>;

template <typename T>
Field size_field(T& ref) {
  return {[&ref](const std::string& v) { ref = static_cast<T>(to_u64(v)); }, [&ref] { return std::to_string(ref); }};
}
Field double_field(double& ref) {
  return {[&ref](const std::string& v) { ref = to_double(v); }, [&ref] { return format_double(ref); }};
}
Field bool_field(bool& ref) {
  return {[&ref](const std::string& v) { ref = to_bool(v); }, [&ref] { return from_bool(ref); }};
}
Field string_field(std::string& ref) {
  return {[&ref](const std::string& v) { ref = v; }, [&ref] { return ref; }};
}
template <typename E, typename Parse>
Field enum_field(E& ref, Parse parse) {
  return {[&ref, parse](const std::string& v) { ref = parse(v); }, [&ref] { return std::string(to_string(ref)); }};
}

FieldMap experiment_fields(ExperimentConfig& c) {
  FieldMap f;
  f["task.num_classes"] = size_field(c.task.num_classes);
  f["task.samples_per_class"] = size_field(c.task.samples_per_class);
  f["task.image_dim"] = size_field(c.task.image_dim);
  f["task.text_dim"] = size_field(c.task.text_dim);
  f["task.class_separation"] = double_field(c.task.class_separation);
  f["task.noise_sigma"] = double_field(c.task.noise_sigma);
  f["task.seed"] = size_field(c.task.seed);
  f["split.support_per_class"] = size_field(c.support_per_class);
  f["split.test_per_class"] = size_field(c.test_per_class);
  f["encoder.image_hidden_dims"] = {[&c](const std::string& v) { c.image_hidden_dims = to_sizes(v); },
                                    [&c] { return from_sizes(c.image_hidden_dims); }};
  f["encoder.text_hidden_dims"] = {[&c](const std::string& v) { c.text_hidden_dims = to_sizes(v); },
                                   [&c] { return from_sizes(c.text_hidden_dims); }};
  f["encoder.embed_dim"] = size_field(c.embed_dim);
  f["encoder.nonlinearity"] = enum_field(c.nonlinearity, parse_nonlinearity);
  f["encoder.seed"] = size_field(c.encoder_seed);

  LixpConfig& l = c.lixp;
  f["lixp.contextual"] = bool_field(l.contextual);
  f["lixp.alpha"] = double_field(l.alpha);
  f["lixp.base_loss"] = enum_field(l.base_loss, parse_base_loss);
  f["lixp.sigmoid_sign"] = enum_field(l.sigmoid_sign, parse_sigmoid_sign);
  f["lixp.variant"] = enum_field(l.variant, parse_context_variant);
  f["lixp.self_mask"] = bool_field(l.self_mask);
  f["lixp.qk_normalized"] = bool_field(l.qk_normalized);
  f["lixp.value_head"] = enum_field(l.value_head, parse_value_head);
  f["lixp.head_nonlinearity"] = enum_field(l.head_nonlinearity, parse_nonlinearity);
  f["lixp.layernorm_keys"] = bool_field(l.layernorm_keys);
  f["lixp.layernorm_values"] = bool_field(l.layernorm_values);
  f["lixp.stale_buffer_size"] = size_field(l.stale_buffer_size);
  f["lixp.active_buffer_subset"] = {
      [&l](const std::string& v) {
        if (v == "full") {
          l.active_buffer_subset.reset();
        } else {
          l.active_buffer_subset = to_size(v);
        }
      },
      [&l] { return l.active_buffer_subset ? std::to_string(*l.active_buffer_subset) : std::string("full"); }};
  f["lixp.separate_context_batch"] = bool_field(l.separate_context_batch);
  f["lixp.residual_alpha"] = double_field(l.residual_alpha);
  f["lixp.grad_through_keys"] = bool_field(l.grad_through_keys);
  f["lixp.grad_through_values"] = bool_field(l.grad_through_values);
  f["lixp.two_stage.stages"] = size_field(l.two_stage.stages);
  f["lixp.two_stage.map"] = enum_field(l.two_stage.map, parse_inter_stage_map);
  f["lixp.two_stage.rebuild_buffer"] = bool_field(l.two_stage.rebuild_buffer);
  f["lixp.coupling"] = enum_field(l.coupling, parse_coupling);
  f["lixp.freeze_tau_ctx"] = bool_field(l.freeze_tau_ctx);

  TrainConfig& t = c.train;
  f["train.steps"] = size_field(t.steps);
  f["train.batch_size"] = size_field(t.batch_size);
  f["train.learning_rate"] = double_field(t.learning_rate);
  f["train.weight_decay"] = double_field(t.weight_decay);
  f["train.grad_clip_norm"] = double_field(t.grad_clip_norm);
  f["train.warmup_steps"] = size_field(t.warmup_steps);
  f["train.optimizer"] = enum_field(t.optimizer, parse_optimizer);
  f["train.adam_beta1"] = double_field(t.adam_beta1);
  f["train.adam_beta2"] = double_field(t.adam_beta2);
  f["train.adam_eps"] = double_field(t.adam_eps);
  f["train.seed"] = size_field(t.seed);
  f["train.tau_init"] = double_field(t.tau_init);
  f["train.tau_ctx_init"] = double_field(t.tau_ctx_init);
  f["train.bias_init"] = double_field(t.bias_init);
  f["train.log_every"] = size_field(t.log_every);

  f["output.checkpoint"] = string_field(c.checkpoint_path);
  f["output.log"] = string_field(c.log_path);
  return f;
}

void apply_entries(const FieldMap& fields, const std::vector<ConfigEntry>& entries) {
  for (const ConfigEntry& e : entries) {
    const auto it = fields.find(e.key);
    if (it == fields.end()) {
      throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
    try {
      it->second.set(e.value);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError("line " + std::to_string(e.line) + ": " + e.key + ": " + ex.what());
    }
  }
}

}  // namespace

std::vector<ConfigEntry> parse_key_values(std::string_view text) {
  std::vector<ConfigEntry> out;
  std::map<std::string, std::size_t, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" + trim(line) + "'");
    }
    ConfigEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (e.key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (const auto it = seen.find(e.key); it != seen.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + e.key + "' already set on line " +
                        std::to_string(it->second));
    }
    seen.emplace(e.key, line_no);
    out.push_back(std::move(e));
  }
  return out;
}

DualEncoder ExperimentConfig::make_model() const {
  return DualEncoder(
      EncoderConfig{task.image_dim, image_hidden_dims, embed_dim, nonlinearity, derive_seed(encoder_seed, stream::kInit, 0)},
      EncoderConfig{task.text_dim, text_hidden_dims, embed_dim, nonlinearity, derive_seed(encoder_seed, stream::kInit, 1)});
}

ExperimentConfig parse_experiment_config(std::string_view text) {
  ExperimentConfig cfg;
  apply_entries(experiment_fields(cfg), parse_key_values(text));
  try {
    cfg.task.validate();
    if (cfg.support_per_class + cfg.test_per_class >= cfg.task.samples_per_class) {
      throw std::invalid_argument("split.support_per_class + split.test_per_class must leave training rows");
    }
    cfg.make_model().image.config().validate();
    cfg.make_model().text.config().validate();
    cfg.train.validate(cfg.lixp);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("invalid configuration: ") + ex.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  try {
    return parse_experiment_config(read_text_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string to_config_text(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  std::string out;
  for (const auto& [key, field] : experiment_fields(copy)) out += key + " = " + field.get() + "\n";
  return out;
}

ExperimentData make_experiment_data(const ExperimentConfig& cfg) {
  ExperimentData d;
  d.pairs = generate_pairs(cfg.task);
  d.split = split_by_class(d.pairs.labels, cfg.task.num_classes, cfg.support_per_class, cfg.test_per_class);
  d.train_images = select_rows(d.pairs.images, d.split.train);
  d.train_texts = select_rows(d.pairs.texts, d.split.train);
  return d;
}

EpisodeFileSpec parse_episode_config(std::string_view text) {
  EpisodeFileSpec s;
  ClassifierConfig shared;
  std::vector<Method> methods{Method::zero_shot, Method::prototypical};
  FieldMap f;
  f["support"] = string_field(s.support_path);
  f["test"] = string_field(s.test_path);
  f["texts"] = string_field(s.texts_path);
  f["shots"] = {[&s](const std::string& v) { s.shots = to_sizes(v); }, [&s] { return from_sizes(s.shots); }};
  f["episodes"] = size_field(s.num_episodes);
  f["seed"] = size_field(s.seed);
  f["threads"] = size_field(s.threads);
  f["classifiers"] = {[&methods](const std::string& v) {
                        methods.clear();
                        for (const std::string& m : split_list(v)) methods.push_back(parse_method(m));
                      },
                      [] { return std::string(); }};
  f["tip.mix"] = double_field(shared.tip.mix);
  f["tip.sharpness"] = double_field(shared.tip.sharpness);
  f["nn.k"] = size_field(shared.nn.k);
  f["nn.softmax_temp"] = double_field(shared.nn.softmax_temp);
  f["nn.rank_offset"] = double_field(shared.nn.rank_offset);
  f["snn.mix_weight"] = double_field(shared.mix_weight);
  f["cv.folds"] = size_field(shared.cv_folds);
  f["output.csv"] = string_field(s.csv_path);
  f["output.json"] = string_field(s.json_path);
  apply_entries(f, parse_key_values(text));

  for (const auto& [key, path] : {std::pair{"support", &s.support_path}, {"test", &s.test_path}, {"texts", &s.texts_path}}) {
    if (path->empty()) throw ConfigError(std::string("episode spec: missing required key '") + key + "'");
  }
  if (s.shots.empty()) throw ConfigError("episode spec: shots must list at least one K");
  if (s.num_episodes == 0) throw ConfigError("episode spec: episodes must be >= 1");
  if (methods.empty()) throw ConfigError("episode spec: classifiers must list at least one method");
  if (!(shared.tip.sharpness > 0.0)) throw ConfigError("episode spec: tip.sharpness must be > 0");
  if (shared.nn.k == 0) throw ConfigError("episode spec: nn.k must be >= 1");
  if (!(shared.nn.softmax_temp > 0.0)) throw ConfigError("episode spec: nn.softmax_temp must be > 0");
  for (Method m : methods) {
    ClassifierConfig c = shared;
    c.method = m;
    s.classifiers.push_back(c);
  }
  return s;
}

EpisodeFileSpec load_episode_config(const std::string& path) {
  try {
    return parse_episode_config(read_text_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace lixp
