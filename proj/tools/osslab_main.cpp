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

// Command-line front end: generate, train, sweep, ablate, eval, emit-plot-data.
// Any "--key value" pair not claimed by a subcommand overrides a config key.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "osslab/errors.hpp"
#include "osslab/experiments.hpp"

namespace fs = std::filesystem;
using namespace osslab;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kFormat = 3, kNumerical = 4 };

struct Common {
  std::string config_path;
  std::string out = "runs";
  std::int64_t stop_after = -1;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--config", common.config_path, "key = value config file");
  sub->add_option("--out", common.out, "output directory");
  sub->add_option("--stop-after", common.stop_after, "stop after this many steps");
  sub->allow_extras();
}

// Config file first, then command-line overrides in order.
TrainingConfig build_config(const Common& common, const std::vector<std::string>& extras) {
  TrainingConfig config = common.config_path.empty() ? TrainingConfig{} : load_config(common.config_path);
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& flag = extras[i];
    if (flag.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + flag + "'");
    std::string key = flag.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("missing value for " + flag);
      value = extras[++i];
    }
    std::replace(key.begin(), key.end(), '-', '_');
    config.set(key, value);
  }
  config.validate();
  return config;
}

ExperimentOptions experiment_options(const Common& common) {
  ExperimentOptions options;
  options.out_dir = common.out;
  if (common.stop_after >= 0) options.stop_after = common.stop_after;
  return options;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("bad sweep value '" + item + "'");
    }
  }
  if (values.empty()) throw ConfigError("no sweep values given");
  return values;
}

nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["accuracy"] = r.closed_set_accuracy;
  j["score_kind"] = to_string(r.score_kind);
  j["auroc"] = r.auroc;
  j["num_id"] = r.num_id;
  j["num_ood"] = r.num_ood;
  for (const auto& [kind, value] : r.auroc_by_kind) j["auroc_by_kind"][to_string(kind)] = value;
  return j;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

int run(int argc, char** argv) {
  CLI::App app{"osslab: open-set semi-supervised learning lab"};
  app.require_subcommand(1);

  Common common;

  auto* generate_cmd = app.add_subcommand("generate", "export the synthetic dataset");
  add_common(generate_cmd, common);

  auto* train_cmd = app.add_subcommand("train", "warm-up and training; writes a run directory");
  add_common(train_cmd, common);

  std::string axis = "pi", values = "0.3,0.4,0.5,0.6,0.7";
  auto* sweep_cmd = app.add_subcommand("sweep", "one training run per axis value");
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--axis", axis, "pi, ood_fraction, w_self, w_sub or warmup_steps");
  sweep_cmd->add_option("--values", values, "comma-separated values");

  auto* ablate_cmd = app.add_subcommand("ablate", "loss grid, decision rules and score kinds");
  add_common(ablate_cmd, common);

  std::string checkpoint_path, dataset_path, score_kind = "subspace";
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset file");
  eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
  eval_cmd->add_option("--dataset", dataset_path)->required();
  eval_cmd->add_option("--score-kind", score_kind);

  std::string run_dir, plot_dir;
  auto* plot_cmd = app.add_subcommand("emit-plot-data", "long-format metrics, histograms, Beta curves");
  plot_cmd->add_option("--run-dir", run_dir)->required();
  plot_cmd->add_option("--out", plot_dir, "defaults to <run-dir>/plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (generate_cmd->parsed()) {
    const TrainingConfig config = build_config(common, generate_cmd->remaining());
    const OpenSetDataset dataset = generate(config.dataset_spec());
    fs::path path = common.out;
    if (path.extension().empty()) {
      fs::create_directories(path);
      path /= run_name(config) + "-dataset.txt";
    } else if (path.has_parent_path()) {
      fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    write_dataset(out, dataset);
    std::cout << path.string() << '\n';
  } else if (train_cmd->parsed()) {
    const TrainingConfig config = build_config(common, train_cmd->remaining());
    TrainOptions options;
    options.run_dir = (fs::path(common.out) / run_name(config)).string();
    if (common.stop_after >= 0) options.stop_after = common.stop_after;
    const TrainResult result = train(config, options);
    std::cout << summary_json(result);
    std::cerr << "run directory: " << options.run_dir << '\n';
  } else if (sweep_cmd->parsed()) {
    const TrainingConfig config = build_config(common, sweep_cmd->remaining());
    const SweepTable table =
        sweep(config, sweep_axis_from_string(axis), parse_values(values), experiment_options(common));
    fs::create_directories(common.out);
    const fs::path path = fs::path(common.out) / fmt::format("sweep_{}_{}.csv", axis, run_name(config));
    std::ofstream out(path);
    write_sweep_table(out, table);
    write_sweep_table(std::cout, table);
    for (const auto& row : table.rows) {
      if (!row.ok) return kFailure;
    }
  } else if (ablate_cmd->parsed()) {
    const TrainingConfig config = build_config(common, ablate_cmd->remaining());
    const AblationMatrix matrix = ablate(config, experiment_options(common));
    write_ablation_table(std::cout, matrix);
  } else if (eval_cmd->parsed()) {
    auto ckpt_in = open_in(checkpoint_path);
    const Checkpoint checkpoint = read_checkpoint(ckpt_in);
    auto data_in = open_in(dataset_path);
    const OpenSetDataset dataset = read_dataset(data_in);
    std::cout << report_json(evaluate_checkpoint(checkpoint, dataset, score_kind_from_string(score_kind)))
                     .dump(2)
              << '\n';
  } else if (plot_cmd->parsed()) {
    auto metrics = open_in(fs::path(run_dir) / "metrics.csv");
    std::ifstream evals(fs::path(run_dir) / "evals.csv");
    const RunLog log = read_run_log(metrics, evals ? &evals : nullptr);
    std::vector<ScoreSnapshot> snapshots;
    const std::regex snapshot_name(R"(scores_step(\d+)\.txt)");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
      if (std::regex_match(entry.path().filename().string(), snapshot_name)) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      auto in = open_in(file);
      snapshots.push_back(read_score_snapshot(in));
    }
    const std::string dir = plot_dir.empty() ? (fs::path(run_dir) / "plots").string() : plot_dir;
    for (const auto& path : emit_plot_data(log, snapshots, dir)) std::cout << path << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kFormat;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
