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

#ifndef OSSLAB_NN_HPP_
#define OSSLAB_NN_HPP_

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "osslab/rng.hpp"

namespace osslab {

enum class Activation { Tanh, Relu, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

// Backbone f: input_dim -> hidden... -> feature_dim, nonlinearity after every
// hidden layer and a linear last layer. Head g: feature_dim -> num_classes
// (affine). Projection h: feature_dim -> feature_dim (linear, no bias).
struct MlpShape {
  int input_dim = 32;
  std::vector<int> hidden = {64, 64};
  int feature_dim = 16;
  int num_classes = 8;
  Activation activation = Activation::Tanh;

  // Throws ConfigError unless all sizes are positive and
  // feature_dim >= num_classes.
  void validate() const;
  bool operator==(const MlpShape&) const = default;
};

// All trainable parameters in one contiguous buffer. Blocks are exposed as
// Eigen maps into the buffer, so the optimizer, the L2 term and gradient
// checks can treat the parameters as a flat vector. The same type doubles as
// the gradient container.
class MlpParams {
 public:
  using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
  using VectorMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

  MlpParams() = default;
  // All-zero parameters of the given shape.
  explicit MlpParams(MlpShape shape);

  // Uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)); biases zero.
  static MlpParams glorot(const MlpShape& shape, Rng& rng);

  const MlpShape& shape() const { return shape_; }
  int num_backbone_layers() const { return static_cast<int>(shape_.hidden.size()) + 1; }

  MatrixMap backbone_weight(int layer);
  ConstMatrixMap backbone_weight(int layer) const;
  VectorMap backbone_bias(int layer);
  ConstVectorMap backbone_bias(int layer) const;
  MatrixMap head_weight();
  ConstMatrixMap head_weight() const;
  VectorMap head_bias();
  ConstVectorMap head_bias() const;
  MatrixMap projection_weight();
  ConstMatrixMap projection_weight() const;

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  std::size_t size() const { return data_.size(); }
  void set_zero();

  struct Block {
    std::string name;
    std::size_t offset;
    int rows;
    int cols;
  };
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  MatrixMap block_matrix(std::size_t index);
  ConstMatrixMap block_matrix(std::size_t index) const;

  MlpShape shape_;
  std::vector<Block> blocks_;
  std::vector<double> data_;
};

// Activations of one batch (samples are columns), kept for the backward pass.
struct ForwardTrace {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;   // pre-activation of each backbone layer
  std::vector<Eigen::MatrixXd> post;  // output of each backbone layer
  Eigen::MatrixXd features;           // z = f(x), feature_dim x n
  Eigen::MatrixXd logits;             // g(z), num_classes x n
  Eigen::MatrixXd probs;              // softmax(logits)
};

// Throws NumericalError on non-finite activations.
ForwardTrace forward(const MlpParams& params, const Eigen::MatrixXd& inputs);
ForwardTrace forward(const MlpParams& params, const Eigen::VectorXd& input);

// h(z) for a batch of features.
Eigen::MatrixXd project(const MlpParams& params, const Eigen::MatrixXd& features);

Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits);

// Upstream gradients for the outputs of one forward pass. A null pointer marks
// the output as a constant: nothing flows back through it.
struct Upstream {
  const Eigen::MatrixXd* features = nullptr;
  const Eigen::MatrixXd* logits = nullptr;
  // Gradient w.r.t. h(features); feeds both h and the backbone.
  const Eigen::MatrixXd* projection = nullptr;
};

// Reverse-mode gradients, accumulated into `grad` (same shape as params).
void backward(const MlpParams& params, const ForwardTrace& trace,
              const Upstream& upstream, MlpParams& grad);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = false;
};

// Loss value at `params`; when `grad` is non-null the analytic gradient is
// written to it as well.
using LossClosure = std::function<double(const MlpParams& params, MlpParams* grad)>;

// Compares the analytic gradient with central differences on a random subset
// of at least `min_coords` coordinates (all of them for small models).
// Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport grad_check(const MlpParams& params, const LossClosure& loss,
                           double tolerance, Rng& rng,
                           std::size_t min_coords = 200, double step = 1e-5);

// Text checkpoint of the parameters:
//   osslab-params v1
//   shape <input_dim> <num_hidden> <hidden...> <feature_dim> <num_classes> <activation>
//   then per block: "block <name> <rows> <cols>" followed by the row-major
//   values, one matrix row per line.
void write_params(std::ostream& out, const MlpParams& params);
MlpParams read_params(std::istream& in);

}  // namespace osslab

#endif  // OSSLAB_NN_HPP_
