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

#include "osslab/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "osslab/errors.hpp"

namespace osslab {

void RunLog::append(StepRecord record) {
  if (!steps.empty() && record.step <= steps.back().step) {
    throw std::logic_error("RunLog: step indices must increase");
  }
  steps.push_back(std::move(record));
}

void RunLog::append(EvalReport report) {
  if (!evals.empty() && report.step <= evals.back().step) {
    throw std::logic_error("RunLog: eval steps must increase");
  }
  evals.push_back(std::move(report));
}

void write_checkpoint(std::ostream& out, const Checkpoint& cp) {
  out << "osslab-checkpoint v1\n";
  out << fmt::format("step {}\n", cp.step);
  out << fmt::format("beta {} {} {} {} {} {} {}\n", cp.beta.id.alpha, cp.beta.id.beta,
                     cp.beta.ood.alpha, cp.beta.ood.beta, cp.beta.pi, cp.beta.epsilon,
                     cp.beta.lambda_ema);
  out << fmt::format("class_means {} {} {}\n", cp.table.feature_dim(), cp.table.num_classes(),
                     cp.table.momentum);
  std::string line = "initialized";
  for (bool b : cp.table.initialized) line += b ? " 1" : " 0";
  out << line << '\n';
  for (int r = 0; r < cp.table.feature_dim(); ++r) {
    line.clear();
    for (int c = 0; c < cp.table.num_classes(); ++c) {
      line += fmt::format("{}{}", c ? " " : "", cp.table.means(r, c));
    }
    out << line << '\n';
  }
  write_params(out, cp.params);
  write_params(out, cp.ema_params);
}

Checkpoint read_checkpoint(std::istream& in) {
  Checkpoint cp;
  std::string tag, version, word;
  if (!(in >> tag >> version) || tag != "osslab-checkpoint" || version != "v1") {
    throw FormatError("not an osslab-checkpoint v1 file");
  }
  if (!(in >> word >> cp.step) || word != "step") throw FormatError("checkpoint: bad step");
  auto& b = cp.beta;
  if (!(in >> word >> b.id.alpha >> b.id.beta >> b.ood.alpha >> b.ood.beta >> b.pi >> b.epsilon >>
        b.lambda_ema) ||
      word != "beta") {
    throw FormatError("checkpoint: bad beta line");
  }
  int d = 0, c = 0;
  double momentum = 0.0;
  if (!(in >> word >> d >> c >> momentum) || word != "class_means" || d < 1 || c < 1) {
    throw FormatError("checkpoint: bad class_means line");
  }
  cp.table = ClassMeanTable(d, c, momentum);
  if (!(in >> word) || word != "initialized") throw FormatError("checkpoint: missing flags");
  for (int j = 0; j < c; ++j) {
    int flag = 0;
    if (!(in >> flag)) throw FormatError("checkpoint: truncated flags");
    cp.table.initialized[j] = flag != 0;
  }
  for (int r = 0; r < d; ++r) {
    for (int j = 0; j < c; ++j) {
      if (!(in >> cp.table.means(r, j))) throw FormatError("checkpoint: truncated means");
    }
  }
  cp.params = read_params(in);
  cp.ema_params = read_params(in);
  return cp;
}

std::string run_name(const TrainingConfig& config) {
  return fmt::format("{}-s{}", config_hash(config), config.seed);
}

namespace {

std::vector<double> clamped(const std::vector<double>& scores) {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = clamp_score(scores[i]);
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

template <typename Fn>
std::string to_text(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

class Trainer {
 public:
  Trainer(const TrainingConfig& config, const OpenSetDataset& dataset, const TrainOptions& options)
      : config_(config),
        dataset_(dataset),
        options_(options),
        stream_(training_view(dataset), config.batch_size, config.mu,
                make_stream(config.seed, "shuffle"), make_stream(config.seed, "augment"),
                config.augment()),
        mask_rng_(make_stream(config.seed, "masks")),
        table_(config.feature_dim, config.data.num_id_classes, config.lambda_means),
        beta_(config.beta),
        rule_(config.decision) {
    Rng init_rng = make_stream(config.seed, "init");
    params_ = MlpParams::glorot(config.network_shape(), init_rng);
    opt_ = OptimizerState(params_, config.sgd_momentum, config.ema_momentum);
    // The class means start from the labeled set under the initial network,
    // so a basis exists from the first step on.
    const TrainingView view = training_view(dataset);
    update_class_means(table_, forward(params_, view.labeled_x).features, view.labels);
    basis_ = compute_basis(table_);
  }

  TrainResult run() {
    const auto& schedule = config_.schedule;
    const std::int64_t last = options_.stop_after
                                  ? std::min(*options_.stop_after, schedule.total_steps)
                                  : schedule.total_steps;
    std::vector<std::int64_t> snapshot_steps =
        options_.snapshot_steps.value_or(std::vector<std::int64_t>{schedule.warmup_steps, last});

    TrainResult result;
    result.config = config_;
    for (std::int64_t k = 0; k < last; ++k) {
      if (contains(snapshot_steps, k)) result.snapshots.push_back(snapshot(k));
      if (contains(options_.checkpoint_steps, k)) result.checkpoints.push_back(checkpoint(k));
      try {
        result.log.append(step(k));
      } catch (const NumericalError&) {
        if (!options_.run_dir.empty()) {
          write_file(std::filesystem::path(options_.run_dir) / "checkpoint.txt",
                     to_text([&](std::ostream& os) { write_checkpoint(os, checkpoint(k)); }));
        }
        throw;
      }
      const std::int64_t done = k + 1;
      if (done % config_.eval_every == 0 || done == last) {
        result.log.append(evaluate(opt_.ema_params, dataset_, table_, basis_, config_.score_kind, done));
      }
    }
    if (contains(snapshot_steps, last)) result.snapshots.push_back(snapshot(last));
    if (contains(options_.checkpoint_steps, last)) result.checkpoints.push_back(checkpoint(last));
    result.checkpoint = checkpoint(last);
    result.final_report = result.log.evals.empty()
                              ? evaluate(opt_.ema_params, dataset_, table_, basis_,
                                         config_.score_kind, last)
                              : result.log.evals.back();
    return result;
  }

 private:
  static bool contains(const std::vector<std::int64_t>& v, std::int64_t k) {
    return std::find(v.begin(), v.end(), k) != v.end();
  }

  Checkpoint checkpoint(std::int64_t step) const {
    return {step, params_, opt_.ema_params, table_, beta_};
  }

  ScoreSnapshot snapshot(std::int64_t step) const {
    return score_snapshot(params_, dataset_.unlabeled, table_, basis_, beta_, ScoreKind::Subspace,
                          step);
  }

  StepRecord step(std::int64_t k) {
    const Batch batch = stream_.next();
    const ForwardTrace labeled = forward(params_, batch.labeled_weak);
    const ForwardTrace weak = forward(params_, batch.unlabeled_weak);
    const ForwardTrace strong = forward(params_, batch.unlabeled_strong);

    // Scores and masks use the basis and Beta model from the previous step.
    const std::vector<double> scores_u = subspace_scores(weak.features, basis_);
    const std::vector<double> scores_l = subspace_scores(labeled.features, basis_);
    std::vector<double> posteriors(scores_u.size());
    for (std::size_t i = 0; i < scores_u.size(); ++i) {
      posteriors[i] = posterior_id(beta_, clamp_score(scores_u[i]), /*regularized=*/true);
    }
    const Decision decision = decide(rule_, scores_u, posteriors, mask_rng_);

    const LossSwitches switches{k < config_.schedule.warmup_steps, config_.drop_self,
                                config_.drop_sub};
    const LossWeights w = effective_weights(config_.weights, switches);

    LossBreakdown parts;
    StepRecord record;
    MlpParams grad(params_.shape());

    const LossGrad sup = loss_sup(labeled.logits, batch.labels);
    parts.sup = sup.value;
    backward(params_, labeled, {.logits = &sup.grad}, grad);

    Eigen::MatrixXd strong_logits_grad, strong_projection_grad, weak_features_grad;
    Upstream strong_up, weak_up;
    if (w.w_semi != 0.0) {
      const SemiLoss semi = loss_semi(weak.probs, strong.logits, decision.id_weight, w.tau);
      parts.semi = semi.value;
      parts.pseudo_label_count = semi.pseudo_label_count;
      record.semi_mask_hash = semi.weight_hash;
      strong_logits_grad = w.w_semi * semi.grad_strong_logits;
      strong_up.logits = &strong_logits_grad;
    }
    if (w.w_self != 0.0) {
      const SelfLoss self = loss_self(project(params_, strong.features), weak.features);
      parts.self_sup = self.value;
      strong_projection_grad = w.w_self * self.grad_projection;
      strong_up.projection = &strong_projection_grad;
    }
    if (w.w_sub != 0.0) {
      const SubLoss sub = loss_sub(weak.features, basis_, decision.id_weight);
      parts.sub = sub.value;
      record.sub_mask_hash = sub.weight_hash;
      weak_features_grad = w.w_sub * sub.grad_features;
      weak_up.features = &weak_features_grad;
    }
    backward(params_, strong, strong_up, grad);
    backward(params_, weak, weak_up, grad);
    parts.reg = loss_reg(params_);
    if (w.w_reg != 0.0) add_loss_reg_grad(params_, w.w_reg, grad);

    record.step = k;
    record.lr = lr(config_.schedule, k);
    record.loss = total_loss(parts, config_.weights, switches);
    sgd_step(params_, grad, opt_, record.lr);

    update_class_means(table_, labeled.features, batch.labels);
    basis_ = compute_basis(table_);
    beta_ = imm_batch_step(beta_, clamped(scores_u), clamped(scores_l));
    ema_update(opt_, params_);

    record.beta = beta_;
    record.mean_p_id = mean_of(posteriors);
    record.mask_rate = mean_of(decision.id_weight);
    record.threshold = decision.threshold;
    return record;
  }

  const TrainingConfig& config_;
  const OpenSetDataset& dataset_;
  const TrainOptions& options_;
  BatchStream stream_;
  Rng mask_rng_;
  MlpParams params_;
  OptimizerState opt_;
  ClassMeanTable table_;
  IdSubspaceBasis basis_;
  BetaMixtureModel beta_;
  DecisionRule rule_;
};

}  // namespace

TrainResult train(const TrainingConfig& config, const TrainOptions& options) {
  config.validate();
  return train(config, generate(config.dataset_spec()), options);
}

TrainResult train(const TrainingConfig& config, const OpenSetDataset& dataset,
                  const TrainOptions& options) {
  config.validate();
  if (dataset.input_dim != config.data.input_dim ||
      dataset.num_classes != config.data.num_id_classes) {
    throw ConfigError("dataset dimensions do not match the config");
  }
  std::filesystem::path dir;
  if (!options.run_dir.empty()) {
    dir = options.run_dir;
    std::filesystem::create_directories(dir);
    write_file(dir / "config.txt", to_text([&](std::ostream& os) { write_config(os, config); }));
  }
  TrainResult result = Trainer(config, dataset, options).run();
  if (!options.run_dir.empty()) {
    write_file(dir / "metrics.csv", to_text([&](std::ostream& os) { write_metrics_csv(os, result.log); }));
    write_file(dir / "evals.csv", to_text([&](std::ostream& os) { write_evals_csv(os, result.log); }));
    write_file(dir / "summary.json", summary_json(result));
    write_file(dir / "checkpoint.txt",
               to_text([&](std::ostream& os) { write_checkpoint(os, result.checkpoint); }));
    for (const auto& snap : result.snapshots) {
      write_file(dir / fmt::format("scores_step{}.txt", snap.step),
                 to_text([&](std::ostream& os) { write_score_snapshot(os, snap); }));
    }
  }
  return result;
}

EvalReport evaluate_checkpoint(const Checkpoint& checkpoint, const OpenSetDataset& dataset,
                               ScoreKind primary) {
  return evaluate(checkpoint.ema_params, dataset, checkpoint.table,
                  compute_basis(checkpoint.table), primary, checkpoint.step);
}

namespace {

constexpr const char* kMetricsHeader =
    "step,lr,sup,semi,self,sub,reg,total,pseudo_labels,alpha_id,beta_id,alpha_ood,beta_ood,"
    "pi,epsilon,lambda_beta,mean_p_id,mask_rate,threshold,semi_mask_hash,sub_mask_hash";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_metrics_csv(std::ostream& out, const RunLog& log) {
  out << kMetricsHeader << '\n';
  for (const auto& r : log.steps) {
    const auto& l = r.loss;
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:016x},{:016x}\n",
                       r.step, r.lr, l.sup, l.semi, l.self_sup, l.sub, l.reg, l.total,
                       l.pseudo_label_count, r.beta.id.alpha, r.beta.id.beta, r.beta.ood.alpha,
                       r.beta.ood.beta, r.beta.pi, r.beta.epsilon, r.beta.lambda_ema, r.mean_p_id,
                       r.mask_rate, r.threshold ? fmt::format("{}", *r.threshold) : std::string(),
                       r.semi_mask_hash, r.sub_mask_hash);
  }
}

void write_evals_csv(std::ostream& out, const RunLog& log) {
  std::string header = "step,accuracy,score_kind,auroc,num_id,num_ood";
  for (auto k : kAllScoreKinds) header += ",auroc_" + to_string(k);
  out << header << '\n';
  for (const auto& e : log.evals) {
    std::string line = fmt::format("{},{},{},{},{},{}", e.step, e.closed_set_accuracy,
                                   to_string(e.score_kind), e.auroc, e.num_id, e.num_ood);
    for (auto k : kAllScoreKinds) line += fmt::format(",{}", e.auroc_by_kind.at(k));
    out << line << '\n';
  }
}

RunLog read_run_log(std::istream& metrics_csv, std::istream* evals_csv) {
  RunLog log;
  std::string line;
  if (!std::getline(metrics_csv, line) || line != kMetricsHeader) {
    throw FormatError("metrics.csv: unexpected header");
  }
  while (std::getline(metrics_csv, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 21) throw FormatError("metrics.csv: wrong column count");
    StepRecord r;
    r.step = std::stoll(c[0]);
    r.lr = std::stod(c[1]);
    r.loss = {std::stod(c[2]), std::stod(c[3]), std::stod(c[4]), std::stod(c[5]),
              std::stod(c[6]), std::stod(c[7]), std::stoi(c[8])};
    r.beta.id = {std::stod(c[9]), std::stod(c[10])};
    r.beta.ood = {std::stod(c[11]), std::stod(c[12])};
    r.beta.pi = std::stod(c[13]);
    r.beta.epsilon = std::stod(c[14]);
    r.beta.lambda_ema = std::stod(c[15]);
    r.mean_p_id = std::stod(c[16]);
    r.mask_rate = std::stod(c[17]);
    if (!c[18].empty()) r.threshold = std::stod(c[18]);
    r.semi_mask_hash = std::stoull(c[19], nullptr, 16);
    r.sub_mask_hash = std::stoull(c[20], nullptr, 16);
    log.append(std::move(r));
  }
  if (evals_csv == nullptr) return log;
  if (!std::getline(*evals_csv, line) || line.rfind("step,accuracy", 0) != 0) {
    throw FormatError("evals.csv: unexpected header");
  }
  while (std::getline(*evals_csv, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    constexpr std::size_t kKinds = std::size(kAllScoreKinds);
    if (c.size() != 6 + kKinds) throw FormatError("evals.csv: wrong column count");
    EvalReport e;
    e.step = std::stoll(c[0]);
    e.closed_set_accuracy = std::stod(c[1]);
    e.score_kind = score_kind_from_string(c[2]);
    e.auroc = std::stod(c[3]);
    e.num_id = std::stoull(c[4]);
    e.num_ood = std::stoull(c[5]);
    for (std::size_t k = 0; k < kKinds; ++k) e.auroc_by_kind[kAllScoreKinds[k]] = std::stod(c[6 + k]);
    log.append(std::move(e));
  }
  return log;
}

std::string summary_json(const TrainResult& result) {
  nlohmann::ordered_json j;
  const auto& r = result.final_report;
  j["seed"] = result.config.seed;
  j["config_hash"] = config_hash(result.config);
  j["step"] = r.step;
  j["accuracy"] = r.closed_set_accuracy;
  j["score_kind"] = to_string(r.score_kind);
  j["auroc"] = r.auroc;
  for (const auto& [kind, value] : r.auroc_by_kind) j["auroc_by_kind"][to_string(kind)] = value;
  const auto& b = result.checkpoint.beta;
  j["beta"] = {{"alpha_id", b.id.alpha}, {"beta_id", b.id.beta},
               {"alpha_ood", b.ood.alpha}, {"beta_ood", b.ood.beta}, {"pi", b.pi}};
  for (const auto& key : config_keys()) j["config"][key] = result.config.get(key);
  return j.dump(2) + "\n";
}

}  // namespace osslab
