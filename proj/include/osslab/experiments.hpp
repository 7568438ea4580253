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

#ifndef OSSLAB_EXPERIMENTS_HPP_
#define OSSLAB_EXPERIMENTS_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "osslab/train.hpp"

namespace osslab {

// Outcome of one member run of a sweep or ablation.
struct RunSummary {
  std::string arm;       // e.g. "pi=0.3", "no_self", "otsu", "energy"
  std::string run_name;  // config hash + seed
  bool ok = false;
  std::string error;  // set when the run failed
  EvalReport report;
};

struct ExperimentOptions {
  // Parent directory for member run directories; empty keeps everything in
  // memory.
  std::string out_dir;
  std::optional<std::int64_t> stop_after;
};

enum class SweepAxis { Pi, OodFraction, WSelf, WSub, WarmupSteps };

std::string to_string(SweepAxis axis);  // the config key it sets
SweepAxis sweep_axis_from_string(const std::string& name);

struct SweepTable {
  SweepAxis axis = SweepAxis::Pi;
  std::vector<double> values;
  std::vector<RunSummary> rows;  // one per value, in value order
};

// One independent training run per value, all with the base seed. A failing
// member is recorded and the sweep continues. Throws ConfigError for
// non-finite values before any run starts.
SweepTable sweep(const TrainingConfig& base, SweepAxis axis, const std::vector<double>& values,
                 const ExperimentOptions& options = {});

struct AblationMatrix {
  // full, no_self, no_sub, no_self_no_sub
  std::vector<RunSummary> loss_grid;
  // sampled, otsu, weighted
  std::vector<RunSummary> decision_rules;
  // One row per score kind, all read off the base run's end-of-warm-up
  // checkpoint, so the accuracy column is shared.
  std::vector<RunSummary> score_kinds;
};

// Runs every arm with the base seed. The base configuration appears in both
// the loss grid and the decision-rule rows; it is trained once.
AblationMatrix ablate(const TrainingConfig& base, const ExperimentOptions& options = {});

// Tables as CSV: "group,arm,run,status,accuracy,auroc,auroc_<kind>...,error".
void write_sweep_table(std::ostream& out, const SweepTable& table);
void write_ablation_table(std::ostream& out, const AblationMatrix& matrix);

// Plot data.
struct MetricRow {
  std::string metric;
  std::int64_t step = 0;
  double value = 0.0;
};

// Long format: per-step training rows, then per-eval rows.
std::vector<MetricRow> long_metrics(const RunLog& log);
void write_long_metrics(std::ostream& out, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_long_metrics(std::istream& in);

inline constexpr int kBetaCurvePoints = 256;

// Component densities and the pi-weighted mixture on an even grid over [0, 1]
// (endpoints evaluated at the clamped score).
struct BetaCurve {
  std::vector<double> s;
  std::vector<double> id;
  std::vector<double> ood;
  std::vector<double> mixture;
};

BetaCurve beta_curve(const BetaMixtureModel& model, int points = kBetaCurvePoints);
void write_beta_curve(std::ostream& out, const BetaCurve& curve);
BetaCurve read_beta_curve(std::istream& in);

// "population,lo,hi,count" rows, population id or ood.
void write_histograms(std::ostream& out, const ScoreSnapshot& snapshot);
std::pair<Histogram, Histogram> read_histograms(std::istream& in);

// Writes metrics_long.csv plus hist_step<k>.csv and beta_step<k>.csv per
// snapshot into `dir`. Returns the written paths. Throws std::invalid_argument
// on an empty log.
std::vector<std::string> emit_plot_data(const RunLog& log,
                                        const std::vector<ScoreSnapshot>& snapshots,
                                        const std::string& dir);

}  // namespace osslab

#endif  // OSSLAB_EXPERIMENTS_HPP_
