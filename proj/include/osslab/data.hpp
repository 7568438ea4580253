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

#ifndef OSSLAB_DATA_HPP_
#define OSSLAB_DATA_HPP_

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "osslab/rng.hpp"

namespace osslab {

struct DatasetSpec {
  int input_dim = 32;
  int num_id_classes = 8;
  int num_ood_clusters = 8;
  // ID training samples per class; the labeled subset is drawn from these.
  int samples_per_class = 400;
  int labeled_per_class = 40;
  // Test samples per ID class. The OOD test set has the same total size.
  int test_per_class = 200;
  // Fraction of OOD samples in the unlabeled pool, strictly inside (0, 1).
  double ood_fraction = 0.5;
  double cluster_spread = 1.0;
  double cluster_separation = 6.0;
  std::uint64_t seed = 0;

  // Throws ConfigError when an invariant is violated.
  void validate() const;
};

struct AugmentConfig {
  double sigma_weak = 0.1;
  double sigma_strong = 0.5;
  double p_drop = 0.2;

  // Default jitter scales relative to the cluster spread.
  static AugmentConfig defaults_for(const DatasetSpec& spec);
};

inline constexpr int kOodLabel = -1;

struct Sample {
  Eigen::VectorXd x;
  int label = kOodLabel;  // class index for ID samples
  bool is_id = false;
};

struct OpenSetDataset {
  int input_dim = 0;
  int num_classes = 0;
  std::vector<Sample> labeled;
  std::vector<Sample> unlabeled;  // labels kept for evaluation only
  std::vector<Sample> test_id;
  std::vector<Sample> test_ood;
};

// Draws Gaussian clusters for C ID classes and the OOD clusters, with all
// centers at least `cluster_separation` apart. Deterministic in spec.seed.
// Throws ConfigError if the centers cannot be placed.
OpenSetDataset generate(const DatasetSpec& spec);

Eigen::VectorXd weak_augment(const Eigen::VectorXd& x, double sigma_weak,
                             Rng& rng);
Eigen::VectorXd strong_augment(const Eigen::VectorXd& x, double sigma_strong,
                               double p_drop, Rng& rng);

// What the trainer may see: labeled inputs with labels and unlabeled inputs
// only. Hidden labels and ID flags of the unlabeled pool are not carried.
struct TrainingView {
  Eigen::MatrixXd labeled_x;  // input_dim x N_l, one sample per column
  std::vector<int> labels;
  Eigen::MatrixXd unlabeled_x;  // input_dim x N_u
};

TrainingView training_view(const OpenSetDataset& dataset);

struct Batch {
  Eigen::MatrixXd labeled_weak;  // input_dim x B
  std::vector<int> labels;
  std::vector<std::size_t> labeled_index;  // positions in the training view
  Eigen::MatrixXd unlabeled_weak;    // input_dim x mu*B
  Eigen::MatrixXd unlabeled_strong;  // input_dim x mu*B
  std::vector<std::size_t> unlabeled_index;
};

// Endless stream of (labeled, unlabeled) batches. Each side walks through a
// fresh permutation per epoch; a batch that straddles an epoch boundary is
// completed from the next permutation.
class BatchStream {
 public:
  BatchStream(TrainingView view, int batch_size, int mu, Rng shuffle_rng,
              Rng augment_rng, AugmentConfig augment);
  BatchStream(TrainingView view, int batch_size, int mu, std::uint64_t seed,
              AugmentConfig augment = {});

  Batch next();

  int batch_size() const { return batch_size_; }
  int unlabeled_batch_size() const { return batch_size_ * mu_; }

 private:
  class EpochCursor {
   public:
    explicit EpochCursor(std::size_t n) : order_(n), pos_(n) {}
    std::size_t take(Rng& rng);

   private:
    std::vector<std::size_t> order_;
    std::size_t pos_;
  };

  TrainingView view_;
  int batch_size_;
  int mu_;
  Rng shuffle_rng_;
  Rng augment_rng_;
  AugmentConfig augment_;
  EpochCursor labeled_cursor_;
  EpochCursor unlabeled_cursor_;
};

// Columnar text format, one sample per row:
//   x_0 ... x_{d-1} label is_id split
// preceded by '#' header lines carrying the format version and dimensions.
// `split` is one of labeled, unlabeled, test_id, test_ood.
void write_dataset(std::ostream& out, const OpenSetDataset& dataset);
OpenSetDataset read_dataset(std::istream& in);

}  // namespace osslab

#endif  // OSSLAB_DATA_HPP_
