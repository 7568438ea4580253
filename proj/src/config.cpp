/*
 * Copyright 2026 The osslab Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "osslab/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "osslab/errors.hpp"

namespace osslab {
namespace {

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
  }
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, v));
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (v.empty() || v == "none") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int<int>(key, item));
  return out;
}

std::string format_int_list(const std::vector<int>& v) {
  if (v.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += fmt::format("{}{}", i ? "," : "", v[i]);
  return out;
}

struct Field {
  std::function<void(TrainingConfig&, const std::string&)> set;
  std::function<std::string(const TrainingConfig&)> get;
};

// Each field is a setter/getter pair built from one generic accessor lambda
// that works on both const and mutable configs.
template <typename Access>
Field real(const std::string& key, Access access) {
  return {[key, access](TrainingConfig& c, const std::string& v) { access(c) = parse_double(key, v); },
          [access](const TrainingConfig& c) {
            return fmt::format("{}", access(c));
          }};
}

template <typename Int, typename Access>
Field integer(const std::string& key, Access access) {
  return {[key, access](TrainingConfig& c, const std::string& v) { access(c) = parse_int<Int>(key, v); },
          [access](const TrainingConfig& c) {
            return fmt::format("{}", access(c));
          }};
}

template <typename Access>
Field boolean(const std::string& key, Access access) {
  return {[key, access](TrainingConfig& c, const std::string& v) { access(c) = parse_bool(key, v); },
          [access](const TrainingConfig& c) {
            return std::string(access(c) ? "true" : "false");
          }};
}

const std::vector<std::pair<std::string, Field>>& registry() {
  static const std::vector<std::pair<std::string, Field>> fields = [] {
    std::vector<std::pair<std::string, Field>> f;
    auto add = [&](const std::string& key, Field field) { f.emplace_back(key, std::move(field)); };
    add("input_dim", integer<int>("input_dim", [](auto& c) -> auto& { return c.data.input_dim; }));
    add("num_id_classes", integer<int>("num_id_classes", [](auto& c) -> auto& { return c.data.num_id_classes; }));
    add("num_ood_clusters", integer<int>("num_ood_clusters", [](auto& c) -> auto& { return c.data.num_ood_clusters; }));
    add("samples_per_class", integer<int>("samples_per_class", [](auto& c) -> auto& { return c.data.samples_per_class; }));
    add("labeled_per_class", integer<int>("labeled_per_class", [](auto& c) -> auto& { return c.data.labeled_per_class; }));
    add("test_per_class", integer<int>("test_per_class", [](auto& c) -> auto& { return c.data.test_per_class; }));
    add("ood_fraction", real("ood_fraction", [](auto& c) -> auto& { return c.data.ood_fraction; }));
    add("cluster_spread", real("cluster_spread", [](auto& c) -> auto& { return c.data.cluster_spread; }));
    add("cluster_separation", real("cluster_separation", [](auto& c) -> auto& { return c.data.cluster_separation; }));
    add("sigma_weak", real("sigma_weak", [](auto& c) -> auto& { return c.sigma_weak; }));
    add("sigma_strong", real("sigma_strong", [](auto& c) -> auto& { return c.sigma_strong; }));
    add("p_drop", real("p_drop", [](auto& c) -> auto& { return c.p_drop; }));
    add("hidden", {[](TrainingConfig& c, const std::string& v) { c.hidden = parse_int_list("hidden", v); },
                   [](const TrainingConfig& c) { return format_int_list(c.hidden); }});
    add("feature_dim", integer<int>("feature_dim", [](auto& c) -> auto& { return c.feature_dim; }));
    add("activation", {[](TrainingConfig& c, const std::string& v) { c.activation = activation_from_string(v); },
                       [](const TrainingConfig& c) { return to_string(c.activation); }});
    add("w_semi", real("w_semi", [](auto& c) -> auto& { return c.weights.w_semi; }));
    add("w_self", real("w_self", [](auto& c) -> auto& { return c.weights.w_self; }));
    add("w_sub", real("w_sub", [](auto& c) -> auto& { return c.weights.w_sub; }));
    add("w_reg", real("w_reg", [](auto& c) -> auto& { return c.weights.w_reg; }));
    add("tau", real("tau", [](auto& c) -> auto& { return c.weights.tau; }));
    add("drop_self", boolean("drop_self", [](auto& c) -> auto& { return c.drop_self; }));
    add("drop_sub", boolean("drop_sub", [](auto& c) -> auto& { return c.drop_sub; }));
    add("eta0", real("eta0", [](auto& c) -> auto& { return c.schedule.eta0; }));
    add("total_steps", integer<std::int64_t>("total_steps", [](auto& c) -> auto& { return c.schedule.total_steps; }));
    add("warmup_steps", integer<std::int64_t>("warmup_steps", [](auto& c) -> auto& { return c.schedule.warmup_steps; }));
    add("gamma", real("gamma", [](auto& c) -> auto& { return c.schedule.gamma; }));
    add("sgd_momentum", real("sgd_momentum", [](auto& c) -> auto& { return c.sgd_momentum; }));
    add("batch_size", integer<int>("batch_size", [](auto& c) -> auto& { return c.batch_size; }));
    add("mu", integer<int>("mu", [](auto& c) -> auto& { return c.mu; }));
    add("pi", real("pi", [](auto& c) -> auto& { return c.beta.pi; }));
    add("epsilon", real("epsilon", [](auto& c) -> auto& { return c.beta.epsilon; }));
    add("lambda_beta", real("lambda_beta", [](auto& c) -> auto& { return c.beta.lambda_ema; }));
    add("alpha_id_init", real("alpha_id_init", [](auto& c) -> auto& { return c.beta.id.alpha; }));
    add("beta_id_init", real("beta_id_init", [](auto& c) -> auto& { return c.beta.id.beta; }));
    add("alpha_ood_init", real("alpha_ood_init", [](auto& c) -> auto& { return c.beta.ood.alpha; }));
    add("beta_ood_init", real("beta_ood_init", [](auto& c) -> auto& { return c.beta.ood.beta; }));
    add("lambda_means", real("lambda_means", [](auto& c) -> auto& { return c.lambda_means; }));
    add("ema_momentum", real("ema_momentum", [](auto& c) -> auto& { return c.ema_momentum; }));
    add("score_kind", {[](TrainingConfig& c, const std::string& v) { c.score_kind = score_kind_from_string(v); },
                       [](const TrainingConfig& c) { return to_string(c.score_kind); }});
    add("decision", {[](TrainingConfig& c, const std::string& v) { c.decision.kind = decision_kind_from_string(v); },
                     [](const TrainingConfig& c) { return to_string(c.decision.kind); }});
    add("otsu_init", real("otsu_init", [](auto& c) -> auto& { return c.decision.threshold; }));
    add("otsu_momentum", real("otsu_momentum", [](auto& c) -> auto& { return c.decision.momentum; }));
    add("otsu_bins", integer<int>("otsu_bins", [](auto& c) -> auto& { return c.decision.num_bins; }));
    add("eval_every", integer<std::int64_t>("eval_every", [](auto& c) -> auto& { return c.eval_every; }));
    add("seed", integer<std::uint64_t>("seed", [](auto& c) -> auto& { return c.seed; }));
    return f;
  }();
  return fields;
}

const Field& find_field(const std::string& key) {
  for (const auto& [name, field] : registry()) {
    if (name == key) return field;
  }
  throw ConfigError(fmt::format("unknown config key '{}'", key));
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void TrainingConfig::set(const std::string& key, const std::string& value) {
  find_field(key).set(*this, trim(value));
}

std::string TrainingConfig::get(const std::string& key) const { return find_field(key).get(*this); }

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, field] : registry()) k.push_back(name);
    return k;
  }();
  return keys;
}

MlpShape TrainingConfig::network_shape() const {
  MlpShape s;
  s.input_dim = data.input_dim;
  s.hidden = hidden;
  s.feature_dim = feature_dim;
  s.num_classes = data.num_id_classes;
  s.activation = activation;
  return s;
}

AugmentConfig TrainingConfig::augment() const {
  AugmentConfig a = AugmentConfig::defaults_for(data);
  if (sigma_weak >= 0.0) a.sigma_weak = sigma_weak;
  if (sigma_strong >= 0.0) a.sigma_strong = sigma_strong;
  if (p_drop >= 0.0) a.p_drop = p_drop;
  return a;
}

DatasetSpec TrainingConfig::dataset_spec() const {
  DatasetSpec spec = data;
  spec.seed = mix64(seed ^ fnv1a("data"));
  return spec;
}

void TrainingConfig::validate() const {
  data.validate();
  network_shape().validate();
  weights.validate();
  schedule.validate();
  beta.validate();
  if (!(p_drop <= 1.0)) throw ConfigError("p_drop must be <= 1");
  if (!(sgd_momentum >= 0.0 && sgd_momentum < 1.0)) throw ConfigError("sgd_momentum must lie in [0, 1)");
  if (batch_size < 1 || mu < 1) throw ConfigError("batch_size and mu must be >= 1");
  if (batch_size > data.num_id_classes * data.labeled_per_class) {
    throw ConfigError("batch_size exceeds the labeled set");
  }
  for (double m : {lambda_means, ema_momentum, decision.momentum}) {
    if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("EMA momenta must lie in [0, 1]");
  }
  if (decision.num_bins < 2) throw ConfigError("otsu_bins must be >= 2");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
}

void write_config(std::ostream& out, const TrainingConfig& config) {
  for (const auto& [name, field] : registry()) out << name << " = " << field.get(config) << '\n';
}

TrainingConfig read_config(std::istream& in) {
  TrainingConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("config line {}: expected 'key = value'", line_no));
    }
    config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return config;
}

TrainingConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return read_config(in);
}

std::string config_hash(const TrainingConfig& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& [name, field] : registry()) {
    if (name == "seed") continue;
    h = fnv1a(name + "=" + field.get(config) + "\n", h);
  }
  return fmt::format("{:016x}", h);
}

}  // namespace osslab
