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

#include "osslab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "osslab/errors.hpp"

namespace osslab {
namespace {

constexpr int kMaxCenterTries = 10000;

std::vector<Eigen::VectorXd> place_centers(const DatasetSpec& spec, Rng& rng) {
  const int total = spec.num_id_classes + spec.num_ood_clusters;
  const double half_width = spec.cluster_separation;
  std::uniform_real_distribution<double> coord(-half_width, half_width);
  std::vector<Eigen::VectorXd> centers;
  centers.reserve(total);
  for (int c = 0; c < total; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxCenterTries && !placed; ++attempt) {
      Eigen::VectorXd candidate(spec.input_dim);
      for (int j = 0; j < spec.input_dim; ++j) candidate[j] = coord(rng);
      placed = std::all_of(centers.begin(), centers.end(), [&](const auto& o) {
        return (o - candidate).norm() >= spec.cluster_separation;
      });
      if (placed) centers.push_back(std::move(candidate));
    }
    if (!placed) {
      throw ConfigError(fmt::format(
          "cannot place {} cluster centers {} apart in {} dimensions",
          total, spec.cluster_separation, spec.input_dim));
    }
  }
  return centers;
}

Sample draw(const Eigen::VectorXd& center, double spread, int label,
            bool is_id, Rng& rng) {
  std::normal_distribution<double> noise(0.0, spread);
  Sample s;
  s.x = center;
  for (Eigen::Index j = 0; j < s.x.size(); ++j) s.x[j] += noise(rng);
  s.label = label;
  s.is_id = is_id;
  return s;
}

}  // namespace

void DatasetSpec::validate() const {
  if (input_dim < 1 || num_id_classes < 1 || num_ood_clusters < 1 ||
      samples_per_class < 1 || labeled_per_class < 1 || test_per_class < 1) {
    throw ConfigError("dataset counts must all be >= 1");
  }
  if (labeled_per_class > samples_per_class) {
    throw ConfigError("labeled_per_class exceeds samples_per_class");
  }
  if (!(ood_fraction > 0.0 && ood_fraction < 1.0)) {
    throw ConfigError("ood_fraction must lie strictly inside (0, 1)");
  }
  if (!(cluster_spread > 0.0) || !(cluster_separation > 0.0) ||
      !std::isfinite(cluster_spread) || !std::isfinite(cluster_separation)) {
    throw ConfigError("cluster_spread and cluster_separation must be positive");
  }
}

AugmentConfig AugmentConfig::defaults_for(const DatasetSpec& spec) {
  return {0.1 * spec.cluster_spread, 0.5 * spec.cluster_spread, 0.2};
}

OpenSetDataset generate(const DatasetSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto centers = place_centers(spec, rng);
  const int C = spec.num_id_classes;

  OpenSetDataset ds;
  ds.input_dim = spec.input_dim;
  ds.num_classes = C;

  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < spec.samples_per_class; ++i) {
      Sample s = draw(centers[c], spec.cluster_spread, c, true, rng);
      if (i < spec.labeled_per_class) ds.labeled.push_back(s);
      ds.unlabeled.push_back(std::move(s));
    }
  }
  const auto num_id = static_cast<double>(ds.unlabeled.size());
  const auto num_ood = static_cast<std::size_t>(
      std::llround(num_id * spec.ood_fraction / (1.0 - spec.ood_fraction)));
  for (std::size_t i = 0; i < num_ood; ++i) {
    const auto& center = centers[C + i % spec.num_ood_clusters];
    ds.unlabeled.push_back(draw(center, spec.cluster_spread, kOodLabel, false, rng));
  }
  std::shuffle(ds.unlabeled.begin(), ds.unlabeled.end(), rng);

  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < spec.test_per_class; ++i) {
      ds.test_id.push_back(draw(centers[c], spec.cluster_spread, c, true, rng));
    }
  }
  const std::size_t num_test_ood =
      static_cast<std::size_t>(C) * spec.test_per_class;
  for (std::size_t i = 0; i < num_test_ood; ++i) {
    const auto& center = centers[C + i % spec.num_ood_clusters];
    ds.test_ood.push_back(draw(center, spec.cluster_spread, kOodLabel, false, rng));
  }
  return ds;
}

Eigen::VectorXd weak_augment(const Eigen::VectorXd& x, double sigma_weak,
                             Rng& rng) {
  if (sigma_weak == 0.0) return x;
  std::normal_distribution<double> noise(0.0, sigma_weak);
  Eigen::VectorXd out = x;
  for (Eigen::Index j = 0; j < out.size(); ++j) out[j] += noise(rng);
  return out;
}

Eigen::VectorXd strong_augment(const Eigen::VectorXd& x, double sigma_strong,
                               double p_drop, Rng& rng) {
  Eigen::VectorXd out = x;
  if (sigma_strong != 0.0) {
    std::normal_distribution<double> noise(0.0, sigma_strong);
    for (Eigen::Index j = 0; j < out.size(); ++j) out[j] += noise(rng);
  }
  if (p_drop > 0.0) {
    std::bernoulli_distribution drop(std::min(p_drop, 1.0));
    for (Eigen::Index j = 0; j < out.size(); ++j) {
      if (drop(rng)) out[j] = 0.0;
    }
  }
  return out;
}

TrainingView training_view(const OpenSetDataset& dataset) {
  TrainingView view;
  const auto d = dataset.input_dim;
  view.labeled_x.resize(d, static_cast<Eigen::Index>(dataset.labeled.size()));
  view.labels.reserve(dataset.labeled.size());
  for (std::size_t i = 0; i < dataset.labeled.size(); ++i) {
    view.labeled_x.col(static_cast<Eigen::Index>(i)) = dataset.labeled[i].x;
    view.labels.push_back(dataset.labeled[i].label);
  }
  view.unlabeled_x.resize(d, static_cast<Eigen::Index>(dataset.unlabeled.size()));
  for (std::size_t i = 0; i < dataset.unlabeled.size(); ++i) {
    view.unlabeled_x.col(static_cast<Eigen::Index>(i)) = dataset.unlabeled[i].x;
  }
  return view;
}

std::size_t BatchStream::EpochCursor::take(Rng& rng) {
  if (pos_ == order_.size()) {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::shuffle(order_.begin(), order_.end(), rng);
    pos_ = 0;
  }
  return order_[pos_++];
}

BatchStream::BatchStream(TrainingView view, int batch_size, int mu,
                         Rng shuffle_rng, Rng augment_rng, AugmentConfig augment)
    : view_(std::move(view)),
      batch_size_(batch_size),
      mu_(mu),
      shuffle_rng_(std::move(shuffle_rng)),
      augment_rng_(std::move(augment_rng)),
      augment_(augment),
      labeled_cursor_(static_cast<std::size_t>(view_.labeled_x.cols())),
      unlabeled_cursor_(static_cast<std::size_t>(view_.unlabeled_x.cols())) {
  if (view_.labeled_x.cols() == 0 || view_.unlabeled_x.cols() == 0) {
    throw ConfigError("batch stream needs nonempty labeled and unlabeled sets");
  }
  if (batch_size_ < 1 || mu_ < 1) {
    throw ConfigError("batch size and mu must be >= 1");
  }
  if (batch_size_ > view_.labeled_x.cols() ||
      static_cast<Eigen::Index>(batch_size_) * mu_ > view_.unlabeled_x.cols()) {
    throw ConfigError("batch larger than the dataset");
  }
}

BatchStream::BatchStream(TrainingView view, int batch_size, int mu,
                         std::uint64_t seed, AugmentConfig augment)
    : BatchStream(std::move(view), batch_size, mu,
                  make_stream(seed, "shuffle"), make_stream(seed, "augment"),
                  augment) {}

Batch BatchStream::next() {
  const auto d = view_.labeled_x.rows();
  const int nu = batch_size_ * mu_;
  Batch b;
  b.labeled_weak.resize(d, batch_size_);
  b.labels.resize(batch_size_);
  b.labeled_index.resize(batch_size_);
  for (int i = 0; i < batch_size_; ++i) {
    const auto idx = labeled_cursor_.take(shuffle_rng_);
    b.labeled_index[i] = idx;
    b.labels[i] = view_.labels[idx];
    b.labeled_weak.col(i) = weak_augment(
        view_.labeled_x.col(static_cast<Eigen::Index>(idx)), augment_.sigma_weak,
        augment_rng_);
  }
  b.unlabeled_weak.resize(d, nu);
  b.unlabeled_strong.resize(d, nu);
  b.unlabeled_index.resize(nu);
  for (int i = 0; i < nu; ++i) {
    const auto idx = unlabeled_cursor_.take(shuffle_rng_);
    b.unlabeled_index[i] = idx;
    const Eigen::VectorXd x = view_.unlabeled_x.col(static_cast<Eigen::Index>(idx));
    b.unlabeled_weak.col(i) = weak_augment(x, augment_.sigma_weak, augment_rng_);
    b.unlabeled_strong.col(i) =
        strong_augment(x, augment_.sigma_strong, augment_.p_drop, augment_rng_);
  }
  return b;
}

namespace {

const char* split_name(int split) {
  static constexpr const char* kNames[] = {"labeled", "unlabeled", "test_id",
                                           "test_ood"};
  return kNames[split];
}

}  // namespace

void write_dataset(std::ostream& out, const OpenSetDataset& dataset) {
  out << "# osslab-dataset v1\n";
  out << fmt::format("# input_dim={} num_classes={}\n", dataset.input_dim,
                     dataset.num_classes);
  out << "# columns: x_0..x_{input_dim-1} label is_id split\n";
  const std::vector<const std::vector<Sample>*> splits = {
      &dataset.labeled, &dataset.unlabeled, &dataset.test_id, &dataset.test_ood};
  std::string line;
  for (int s = 0; s < 4; ++s) {
    for (const auto& sample : *splits[s]) {
      line.clear();
      for (Eigen::Index j = 0; j < sample.x.size(); ++j) {
        fmt::format_to(std::back_inserter(line), "{} ", sample.x[j]);
      }
      fmt::format_to(std::back_inserter(line), "{} {} {}\n", sample.label,
                     sample.is_id ? 1 : 0, split_name(s));
      out << line;
    }
  }
}

OpenSetDataset read_dataset(std::istream& in) {
  OpenSetDataset ds;
  std::string line;
  if (!std::getline(in, line) || line != "# osslab-dataset v1") {
    throw FormatError("not an osslab-dataset v1 file");
  }
  if (!std::getline(in, line) ||
      std::sscanf(line.c_str(), "# input_dim=%d num_classes=%d", &ds.input_dim,
                  &ds.num_classes) != 2 ||
      ds.input_dim < 1) {
    throw FormatError("bad dataset dimension header");
  }
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    Sample s;
    s.x.resize(ds.input_dim);
    for (int j = 0; j < ds.input_dim; ++j) row >> s.x[j];
    int is_id = 0;
    std::string split;
    row >> s.label >> is_id >> split;
    if (!row || (is_id != 0 && is_id != 1)) {
      throw FormatError(fmt::format("malformed dataset row at line {}", line_no));
    }
    s.is_id = is_id == 1;
    if (s.is_id != (s.label >= 0 && s.label < ds.num_classes) ||
        (!s.is_id && s.label != kOodLabel)) {
      throw FormatError(fmt::format("label/is_id mismatch at line {}", line_no));
    }
    if (split == "labeled") {
      ds.labeled.push_back(std::move(s));
    } else if (split == "unlabeled") {
      ds.unlabeled.push_back(std::move(s));
    } else if (split == "test_id") {
      ds.test_id.push_back(std::move(s));
    } else if (split == "test_ood") {
      ds.test_ood.push_back(std::move(s));
    } else {
      throw FormatError(fmt::format("unknown split '{}' at line {}", split, line_no));
    }
  }
  return ds;
}

}  // namespace osslab
