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

#ifndef OSSLAB_TRAIN_HPP_
#define OSSLAB_TRAIN_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "osslab/config.hpp"
#include "osslab/eval.hpp"

namespace osslab {

struct StepRecord {
  std::int64_t step = 0;
  double lr = 0.0;
  LossBreakdown loss;
  BetaMixtureModel beta;  // after this step's update
  double mean_p_id = 0.0;
  double mask_rate = 0.0;  // mean ID weight handed to the losses
  std::optional<double> threshold;
  // Hashes of the ID weights consumed by the pseudo-label and subspace losses
  // (0 when the loss was not evaluated).
  std::uint64_t semi_mask_hash = 0;
  std::uint64_t sub_mask_hash = 0;
};

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<EvalReport> evals;

  // Throws std::logic_error if step indices would stop increasing.
  void append(StepRecord record);
  void append(EvalReport report);
};

struct Checkpoint {
  std::int64_t step = 0;
  MlpParams params;
  MlpParams ema_params;
  ClassMeanTable table;
  BetaMixtureModel beta;
};

// Text checkpoint: "osslab-checkpoint v1", the step, the Beta model, the class
// mean table (one row per feature dimension), then the raw and EMA parameter
// blocks in the osslab-params layout.
void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);

struct TrainOptions {
  // Stop after this many steps (the schedule still spans total_steps).
  std::optional<std::int64_t> stop_after;
  // When set, config, metrics, evals, summary, checkpoint and score
  // snapshots are written here.
  std::string run_dir;
  // Steps (counted as completed steps) at which to take score snapshots of
  // the unlabeled pool. Defaults to the end of warm-up and the end of training.
  std::optional<std::vector<std::int64_t>> snapshot_steps;
  // Completed-step counts at which to keep a full checkpoint in the result.
  std::vector<std::int64_t> checkpoint_steps;
};

struct TrainResult {
  TrainingConfig config;
  RunLog log;
  Checkpoint checkpoint;
  EvalReport final_report;
  std::vector<ScoreSnapshot> snapshots;
  std::vector<Checkpoint> checkpoints;  // one per reached checkpoint_steps entry
};

// Runs warm-up and training on the generated dataset. Numerical blow-up
// rethrows NumericalError after writing the last valid checkpoint (when
// run_dir is set).
TrainResult train(const TrainingConfig& config, const TrainOptions& options = {});
TrainResult train(const TrainingConfig& config, const OpenSetDataset& dataset,
                  const TrainOptions& options = {});

// Evaluates a checkpoint's EMA parameters against a dataset.
EvalReport evaluate_checkpoint(const Checkpoint& checkpoint, const OpenSetDataset& dataset,
                               ScoreKind primary);

// "<config hash>-s<seed>"
std::string run_name(const TrainingConfig& config);

void write_metrics_csv(std::ostream& out, const RunLog& log);
void write_evals_csv(std::ostream& out, const RunLog& log);
RunLog read_run_log(std::istream& metrics_csv, std::istream* evals_csv);

// Final accuracy, AUROC per score kind, config echo and seed.
std::string summary_json(const TrainResult& result);

}  // namespace osslab

#endif  // OSSLAB_TRAIN_HPP_
