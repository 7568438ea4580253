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

#include "osslab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "osslab/errors.hpp"

namespace osslab {

namespace {

struct MemberRun {
  RunSummary summary;
  std::optional<TrainResult> result;
};

MemberRun run_member(const TrainingConfig& config, std::string arm,
                     const ExperimentOptions& options, std::vector<std::int64_t> checkpoint_steps = {}) {
  MemberRun member;
  member.summary.arm = std::move(arm);
  member.summary.run_name = run_name(config);
  TrainOptions train_options;
  train_options.stop_after = options.stop_after;
  train_options.checkpoint_steps = std::move(checkpoint_steps);
  if (!options.out_dir.empty()) {
    train_options.run_dir =
        (std::filesystem::path(options.out_dir) / member.summary.run_name).string();
  }
  try {
    member.result = train(config, train_options);
    member.summary.report = member.result->final_report;
    member.summary.ok = true;
  } catch (const std::exception& e) {
    member.summary.error = e.what();
  }
  return member;
}

std::string csv_header() {
  std::string h = "group,arm,run,status,accuracy,auroc";
  for (auto k : kAllScoreKinds) h += ",auroc_" + to_string(k);
  return h + ",error";
}

std::string csv_row(const std::string& group, const RunSummary& r) {
  std::string line = fmt::format("{},{},{},{}", group, r.arm, r.run_name, r.ok ? "ok" : "failed");
  if (r.ok) {
    line += fmt::format(",{},{}", r.report.closed_set_accuracy, r.report.auroc);
    for (auto k : kAllScoreKinds) {
      auto it = r.report.auroc_by_kind.find(k);
      line += it == r.report.auroc_by_kind.end() ? std::string(",") : fmt::format(",{}", it->second);
    }
  } else {
    line += ",,";
    for (std::size_t i = 0; i < std::size(kAllScoreKinds); ++i) line += ",";
  }
  // Errors go last and lose their commas so the row stays parseable.
  std::string error = r.error;
  for (char& c : error) {
    if (c == ',' || c == '\n') c = ';';
  }
  return line + "," + error;
}

}  // namespace

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Pi: return "pi";
    case SweepAxis::OodFraction: return "ood_fraction";
    case SweepAxis::WSelf: return "w_self";
    case SweepAxis::WSub: return "w_sub";
    case SweepAxis::WarmupSteps: return "warmup_steps";
  }
  throw std::logic_error("unknown sweep axis");
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  for (auto a : {SweepAxis::Pi, SweepAxis::OodFraction, SweepAxis::WSelf, SweepAxis::WSub,
                 SweepAxis::WarmupSteps}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown sweep axis '" + name + "'");
}

SweepTable sweep(const TrainingConfig& base, SweepAxis axis, const std::vector<double>& values,
                 const ExperimentOptions& options) {
  for (double v : values) {
    if (!std::isfinite(v)) throw ConfigError("sweep values must be finite");
  }
  base.validate();
  SweepTable table{axis, values, {}};
  const std::string key = to_string(axis);
  for (double v : values) {
    const std::string text = axis == SweepAxis::WarmupSteps
                                 ? fmt::format("{}", static_cast<std::int64_t>(std::llround(v)))
                                 : fmt::format("{}", v);
    const std::string arm = key + "=" + text;
    TrainingConfig config = base;
    try {
      config.set(key, text);
      config.validate();
    } catch (const std::exception& e) {
      RunSummary failed;
      failed.arm = arm;
      failed.error = e.what();
      table.rows.push_back(std::move(failed));
      continue;
    }
    table.rows.push_back(run_member(config, arm, options).summary);
  }
  return table;
}

AblationMatrix ablate(const TrainingConfig& base, const ExperimentOptions& options) {
  base.validate();
  AblationMatrix matrix;
  std::map<std::string, RunSummary> done;  // keyed by run name

  const std::int64_t warmup_end = base.schedule.warmup_steps;
  MemberRun base_run = run_member(base, "full", options, {warmup_end});
  done.emplace(base_run.summary.run_name, base_run.summary);

  auto run_arm = [&](TrainingConfig config, const std::string& arm) {
    RunSummary summary;
    const std::string name = run_name(config);
    if (auto it = done.find(name); it != done.end()) {
      summary = it->second;
    } else {
      summary = run_member(config, arm, options).summary;
      done.emplace(name, summary);
    }
    summary.arm = arm;
    return summary;
  };

  matrix.loss_grid.push_back(base_run.summary);
  for (auto [arm, drop_self, drop_sub] : {std::tuple{"no_self", true, false},
                                          std::tuple{"no_sub", false, true},
                                          std::tuple{"no_self_no_sub", true, true}}) {
    TrainingConfig config = base;
    config.drop_self = drop_self;
    config.drop_sub = drop_sub;
    matrix.loss_grid.push_back(run_arm(config, arm));
  }

  for (auto kind : {DecisionKind::SampledMask, DecisionKind::OtsuThreshold,
                    DecisionKind::DirectWeight}) {
    TrainingConfig config = base;
    config.decision.kind = kind;
    matrix.decision_rules.push_back(run_arm(config, to_string(kind)));
  }

  // Score comparison on the shared end-of-warm-up checkpoint.
  const Checkpoint* checkpoint = nullptr;
  if (base_run.result && !base_run.result->checkpoints.empty()) {
    checkpoint = &base_run.result->checkpoints.front();
  }
  std::optional<EvalReport> warmup_report;
  std::string error = base_run.summary.ok ? "warm-up end not reached" : base_run.summary.error;
  if (checkpoint != nullptr) {
    try {
      warmup_report = evaluate_checkpoint(*checkpoint, generate(base.dataset_spec()),
                                          ScoreKind::Subspace);
    } catch (const std::exception& e) {
      error = e.what();
    }
  }
  for (auto kind : kAllScoreKinds) {
    RunSummary row;
    row.arm = to_string(kind);
    row.run_name = base_run.summary.run_name;
    if (warmup_report) {
      row.ok = true;
      row.report = *warmup_report;
      row.report.score_kind = kind;
      row.report.auroc = warmup_report->auroc_by_kind.at(kind);
    } else {
      row.error = error;
    }
    matrix.score_kinds.push_back(std::move(row));
  }

  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    std::ofstream out(std::filesystem::path(options.out_dir) / "ablation.csv");
    write_ablation_table(out, matrix);
  }
  return matrix;
}

void write_sweep_table(std::ostream& out, const SweepTable& table) {
  out << csv_header() << '\n';
  for (const auto& row : table.rows) out << csv_row("sweep_" + to_string(table.axis), row) << '\n';
}

void write_ablation_table(std::ostream& out, const AblationMatrix& matrix) {
  out << csv_header() << '\n';
  for (const auto& row : matrix.loss_grid) out << csv_row("losses", row) << '\n';
  for (const auto& row : matrix.decision_rules) out << csv_row("decision", row) << '\n';
  for (const auto& row : matrix.score_kinds) out << csv_row("score_at_warmup", row) << '\n';
}

// ---------------------------------------------------------------------------
// Plot data

std::vector<MetricRow> long_metrics(const RunLog& log) {
  std::vector<MetricRow> rows;
  rows.reserve(log.steps.size() * 14 + log.evals.size() * 9);
  for (const auto& r : log.steps) {
    const auto push = [&](const char* name, double v) { rows.push_back({name, r.step, v}); };
    push("lr", r.lr);
    push("loss_sup", r.loss.sup);
    push("loss_semi", r.loss.semi);
    push("loss_self", r.loss.self_sup);
    push("loss_sub", r.loss.sub);
    push("loss_reg", r.loss.reg);
    push("loss_total", r.loss.total);
    push("pseudo_labels", r.loss.pseudo_label_count);
    push("alpha_id", r.beta.id.alpha);
    push("beta_id", r.beta.id.beta);
    push("alpha_ood", r.beta.ood.alpha);
    push("beta_ood", r.beta.ood.beta);
    push("mean_p_id", r.mean_p_id);
    push("mask_rate", r.mask_rate);
    if (r.threshold) push("otsu_threshold", *r.threshold);
  }
  for (const auto& e : log.evals) {
    rows.push_back({"accuracy", e.step, e.closed_set_accuracy});
    for (const auto& [kind, value] : e.auroc_by_kind) {
      rows.push_back({"auroc_" + to_string(kind), e.step, value});
    }
  }
  return rows;
}

void write_long_metrics(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << "metric,step,value\n";
  for (const auto& r : rows) out << fmt::format("{},{},{}\n", r.metric, r.step, r.value);
}

std::vector<MetricRow> read_long_metrics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "metric,step,value") {
    throw FormatError("long metrics: unexpected header");
  }
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) throw FormatError("long metrics: bad row");
    try {
      rows.push_back({line.substr(0, a), std::stoll(line.substr(a + 1, b - a - 1)),
                      std::stod(line.substr(b + 1))});
    } catch (const std::logic_error&) {
      throw FormatError("long metrics: bad number in '" + line + "'");
    }
  }
  return rows;
}

BetaCurve beta_curve(const BetaMixtureModel& model, int points) {
  if (points < 2) throw std::invalid_argument("beta_curve: need at least 2 points");
  BetaCurve c;
  for (int i = 0; i < points; ++i) {
    const double s = static_cast<double>(i) / (points - 1);
    const double clamped = clamp_score(s);
    const double id = beta_pdf(model.id, clamped);
    const double ood = beta_pdf(model.ood, clamped);
    c.s.push_back(s);
    c.id.push_back(id);
    c.ood.push_back(ood);
    c.mixture.push_back(model.pi * id + (1.0 - model.pi) * ood);
  }
  return c;
}

void write_beta_curve(std::ostream& out, const BetaCurve& curve) {
  out << "s,pdf_id,pdf_ood,pdf_mixture\n";
  for (std::size_t i = 0; i < curve.s.size(); ++i) {
    out << fmt::format("{},{},{},{}\n", curve.s[i], curve.id[i], curve.ood[i], curve.mixture[i]);
  }
}

BetaCurve read_beta_curve(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "s,pdf_id,pdf_ood,pdf_mixture") {
    throw FormatError("beta curve: unexpected header");
  }
  BetaCurve c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double s, id, ood, mix;
    if (!(row >> s >> id >> ood >> mix)) throw FormatError("beta curve: bad row");
    c.s.push_back(s);
    c.id.push_back(id);
    c.ood.push_back(ood);
    c.mixture.push_back(mix);
  }
  return c;
}

void write_histograms(std::ostream& out, const ScoreSnapshot& snapshot) {
  out << "population,lo,hi,count\n";
  for (const auto& [name, hist] : {std::pair{"id", &snapshot.id_hist},
                                   std::pair{"ood", &snapshot.ood_hist}}) {
    const double width = (hist->hi - hist->lo) / static_cast<double>(hist->counts.size());
    for (std::size_t b = 0; b < hist->counts.size(); ++b) {
      out << fmt::format("{},{},{},{}\n", name, hist->lo + width * b,
                         b + 1 == hist->counts.size() ? hist->hi : hist->lo + width * (b + 1),
                         hist->counts[b]);
    }
  }
}

std::pair<Histogram, Histogram> read_histograms(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "population,lo,hi,count") {
    throw FormatError("histograms: unexpected header");
  }
  Histogram id, ood;
  bool id_seen = false, ood_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    std::string population;
    double lo, hi;
    std::int64_t count;
    if (!(row >> population >> lo >> hi >> count)) throw FormatError("histograms: bad row");
    Histogram* h = nullptr;
    bool* seen = nullptr;
    if (population == "id") {
      h = &id;
      seen = &id_seen;
    } else if (population == "ood") {
      h = &ood;
      seen = &ood_seen;
    } else {
      throw FormatError("histograms: unknown population '" + population + "'");
    }
    if (!*seen) {
      h->lo = lo;
      *seen = true;
    }
    h->hi = hi;
    h->counts.push_back(count);
  }
  return {id, ood};
}

std::vector<std::string> emit_plot_data(const RunLog& log,
                                        const std::vector<ScoreSnapshot>& snapshots,
                                        const std::string& dir) {
  if (log.steps.empty()) throw std::invalid_argument("emit_plot_data: empty run log");
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  auto open = [&](const std::string& name) {
    const auto path = std::filesystem::path(dir) / name;
    written.push_back(path.string());
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    return out;
  };
  {
    auto out = open("metrics_long.csv");
    write_long_metrics(out, long_metrics(log));
  }
  for (const auto& snap : snapshots) {
    {
      auto out = open(fmt::format("hist_step{}.csv", snap.step));
      write_histograms(out, snap);
    }
    auto out = open(fmt::format("beta_step{}.csv", snap.step));
    write_beta_curve(out, beta_curve(snap.model));
  }
  return written;
}

}  // namespace osslab
