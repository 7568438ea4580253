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

#include "osslab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "osslab/errors.hpp"

namespace osslab {

double accuracy(const Eigen::MatrixXd& probs, std::span<const int> labels) {
  if (probs.cols() != static_cast<Eigen::Index>(labels.size()) || labels.empty()) {
    throw std::invalid_argument("accuracy: need one label per nonempty column");
  }
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < probs.cols(); ++i) {
    Eigen::Index best = 0;
    probs.col(i).maxCoeff(&best);  // first maximum wins
    if (best == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  if (id_scores.empty() || ood_scores.empty()) {
    throw std::invalid_argument("auroc: both score lists must be nonempty");
  }
  struct Entry {
    double score;
    bool id;
  };
  std::vector<Entry> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) all.push_back({s, true});
  for (double s : ood_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });

  // Twice the rank sum of ID entries; mid-ranks of tie groups are half
  // integers, so doubling keeps every quantity an exact integer.
  double twice_rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double twice_mid_rank = static_cast<double>(i + 1 + j);  // (i+1 + j)
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].id) twice_rank_sum += twice_mid_rank;
    }
    i = j;
  }
  const double n = static_cast<double>(id_scores.size());
  const double m = static_cast<double>(ood_scores.size());
  // U = R - n(n+1)/2, counted in halves.
  const double twice_u = twice_rank_sum - n * (n + 1.0);
  return (twice_u / 2.0) / (n * m);
}

namespace {

std::vector<double> kind_scores(ScoreKind kind, const ForwardTrace& trace,
                                const ClassMeanTable& table, const IdSubspaceBasis& basis) {
  std::vector<double> out(static_cast<std::size_t>(trace.features.cols()));
  for (Eigen::Index i = 0; i < trace.features.cols(); ++i) {
    const Eigen::VectorXd z = trace.features.col(i);
    const Eigen::VectorXd logits = trace.logits.col(i);
    out[static_cast<std::size_t>(i)] = alt_score(kind, z, &logits, table, basis);
  }
  return out;
}

Eigen::MatrixXd stack(const std::vector<Sample>& samples, int dim) {
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = samples[i].x;
  }
  return x;
}

}  // namespace

TestScores score_test_sets(const MlpParams& params, const OpenSetDataset& dataset,
                           const ClassMeanTable& table, const IdSubspaceBasis& basis) {
  TestScores out;
  const ForwardTrace id_trace = forward(params, stack(dataset.test_id, dataset.input_dim));
  const ForwardTrace ood_trace = forward(params, stack(dataset.test_ood, dataset.input_dim));
  out.id_probs = id_trace.probs;
  for (const auto& s : dataset.test_id) out.id_labels.push_back(s.label);
  for (auto kind : kAllScoreKinds) {
    out.id[kind] = kind_scores(kind, id_trace, table, basis);
    out.ood[kind] = kind_scores(kind, ood_trace, table, basis);
  }
  return out;
}

EvalReport evaluate(const MlpParams& params, const OpenSetDataset& dataset,
                    const ClassMeanTable& table, const IdSubspaceBasis& basis,
                    ScoreKind primary, std::int64_t step) {
  const TestScores scores = score_test_sets(params, dataset, table, basis);
  EvalReport report;
  report.closed_set_accuracy = accuracy(scores.id_probs, scores.id_labels);
  for (auto kind : kAllScoreKinds) {
    report.auroc_by_kind[kind] = auroc(scores.id.at(kind), scores.ood.at(kind));
  }
  report.score_kind = primary;
  report.auroc = report.auroc_by_kind.at(primary);
  report.num_id = dataset.test_id.size();
  report.num_ood = dataset.test_ood.size();
  report.step = step;
  return report;
}

std::int64_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

Histogram histogram(std::span<const double> values, int bins, double lo, double hi) {
  if (bins < 1 || !(hi >= lo)) throw std::invalid_argument("histogram: bad range");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double width = hi > lo ? (hi - lo) / bins : 1.0;
  for (double v : values) {
    const double pos = std::floor((v - lo) / width);
    const int bin = static_cast<int>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  return h;
}

ScoreSnapshot score_snapshot(const MlpParams& params, const std::vector<Sample>& samples,
                             const ClassMeanTable& table, const IdSubspaceBasis& basis,
                             const BetaMixtureModel& model, ScoreKind kind,
                             std::int64_t step) {
  ScoreSnapshot snap;
  snap.kind = kind;
  snap.step = step;
  snap.model = model;
  if (samples.empty()) return snap;
  const ForwardTrace trace = forward(params, stack(samples, params.shape().input_dim));
  snap.scores = kind_scores(kind, trace, table, basis);
  std::vector<double> id, ood;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    snap.is_id.push_back(samples[i].is_id ? 1 : 0);
    (samples[i].is_id ? id : ood).push_back(snap.scores[i]);
  }
  double lo = 0.0, hi = 1.0;
  if (kind != ScoreKind::Subspace) {
    const auto [mn, mx] = std::minmax_element(snap.scores.begin(), snap.scores.end());
    lo = *mn;
    hi = *mx;
  }
  snap.id_hist = histogram(id, kSnapshotBins, lo, hi);
  snap.ood_hist = histogram(ood, kSnapshotBins, lo, hi);
  return snap;
}

void write_score_snapshot(std::ostream& out, const ScoreSnapshot& s) {
  out << "# osslab-scores v1\n";
  out << fmt::format("# kind={} step={} alpha_id={} beta_id={} alpha_ood={} beta_ood={} pi={}\n",
                     to_string(s.kind), s.step, s.model.id.alpha, s.model.id.beta,
                     s.model.ood.alpha, s.model.ood.beta, s.model.pi);
  out << "score is_id\n";
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    out << fmt::format("{} {}\n", s.scores[i], static_cast<int>(s.is_id[i]));
  }
  auto write_hist = [&](const char* name, const Histogram& h) {
    std::string line = fmt::format("# hist {} {} {}", name, h.lo, h.hi);
    for (auto c : h.counts) line += fmt::format(" {}", c);
    out << line << '\n';
  };
  write_hist("id", s.id_hist);
  write_hist("ood", s.ood_hist);
}

ScoreSnapshot read_score_snapshot(std::istream& in) {
  ScoreSnapshot s;
  std::string line;
  if (!std::getline(in, line) || line != "# osslab-scores v1") {
    throw FormatError("not an osslab-scores v1 file");
  }
  if (!std::getline(in, line)) throw FormatError("missing score header");
  {
    std::istringstream hdr(line.substr(1));
    std::string field;
    while (hdr >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) throw FormatError("bad score header field " + field);
      const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
      if (key == "kind") s.kind = score_kind_from_string(value);
      else if (key == "step") s.step = std::stoll(value);
      else if (key == "alpha_id") s.model.id.alpha = std::stod(value);
      else if (key == "beta_id") s.model.id.beta = std::stod(value);
      else if (key == "alpha_ood") s.model.ood.alpha = std::stod(value);
      else if (key == "beta_ood") s.model.ood.beta = std::stod(value);
      else if (key == "pi") s.model.pi = std::stod(value);
      else throw FormatError("unknown score header key " + key);
    }
  }
  if (!std::getline(in, line) || line != "score is_id") throw FormatError("missing column header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    if (line.rfind("# hist ", 0) == 0) {
      std::string hash, tag, name;
      Histogram h;
      row >> hash >> tag >> name >> h.lo >> h.hi;
      std::int64_t c = 0;
      while (row >> c) h.counts.push_back(c);
      (name == "id" ? s.id_hist : s.ood_hist) = std::move(h);
      continue;
    }
    double score = 0.0;
    int id = 0;
    if (!(row >> score >> id) || (id != 0 && id != 1)) throw FormatError("bad score row: " + line);
    s.scores.push_back(score);
    s.is_id.push_back(static_cast<std::uint8_t>(id));
  }
  return s;
}

}  // namespace osslab
