// Copyright (c) 2026 The umvc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Differentiable building blocks with hand-written backward passes. Feature
// maps are channels x frames.

#ifndef UMVC_LAYERS_H_
#define UMVC_LAYERS_H_

#include <Eigen/Dense>

namespace umvc {

using FeatureMap = Eigen::MatrixXd;

inline constexpr double kNormEpsilon = 1e-5;

struct InstanceNormResult {
  FeatureMap normalized;
  Eigen::VectorXd mean;
  Eigen::VectorXd std;  // sqrt(var + eps)
};

InstanceNormResult InstanceNorm(const FeatureMap& x, double epsilon = kNormEpsilon);

// Gradient w.r.t. the input of InstanceNorm given gradients w.r.t. the
// normalized output and, optionally, the returned mean and std.
FeatureMap InstanceNormBackward(const InstanceNormResult& fwd, const FeatureMap& d_normalized,
                                const Eigen::VectorXd* d_mean = nullptr,
                                const Eigen::VectorXd* d_std = nullptr);

// alpha[i, j] = softmax_j(q_i . k_j / sqrt(d)); columns of queries/keys are
// the attended items (frames for the time axis, channels for the channel axis).
Eigen::MatrixXd AttentionWeights(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& keys);

struct AttentionGrads {
  Eigen::MatrixXd d_queries;
  Eigen::MatrixXd d_keys;
};

AttentionGrads AttentionWeightsBackward(const Eigen::MatrixXd& queries,
                                        const Eigen::MatrixXd& keys,
                                        const Eigen::MatrixXd& alpha,
                                        const Eigen::MatrixXd& d_alpha);

enum class Axis { kTime, kChannel };

struct WeightedStatsResult {
  Eigen::MatrixXd mean;  // C x Tq (time) or C x 1 (channel)
  Eigen::MatrixXd std;
};

// Time axis: alpha is Tq x Tv; every query frame gets the alpha-weighted
// per-channel mean and std of the value frames.
// Channel axis: alpha is C x C; channel c gets the statistics of the mixture
// of value channels weighted by alpha[c, :], each channel contributing all of
// its frames.
// std = sqrt(weighted variance + eps).
WeightedStatsResult WeightedStats(const FeatureMap& values, const Eigen::MatrixXd& alpha, Axis axis,
                                  double epsilon = kNormEpsilon);

struct WeightedStatsGrads {
  FeatureMap d_values;
  Eigen::MatrixXd d_alpha;
};

WeightedStatsGrads WeightedStatsBackward(const FeatureMap& values, const Eigen::MatrixXd& alpha,
                                         Axis axis, const WeightedStatsResult& fwd,
                                         const Eigen::MatrixXd& d_mean,
                                         const Eigen::MatrixXd& d_std);

// "Same" 1-D convolution, odd kernel, zero padding. weight is
// out x (kernel * in) with column index tap * in + channel.
struct Conv1dCache {
  Eigen::MatrixXd columns;  // (kernel * in) x T
  int in_channels = 0;
  int kernel = 0;
};

FeatureMap Conv1d(const Eigen::MatrixXd& weight, const Eigen::VectorXd& bias, const FeatureMap& x,
                  int kernel, Conv1dCache* cache);

struct Conv1dGrads {
  Eigen::MatrixXd d_weight;
  Eigen::VectorXd d_bias;
  FeatureMap d_input;
};

Conv1dGrads Conv1dBackward(const Eigen::MatrixXd& weight, const Conv1dCache& cache,
                           const FeatureMap& d_out, bool need_input_grad = true);

FeatureMap Relu(const FeatureMap& x);
FeatureMap ReluBackward(const FeatureMap& pre_activation, const FeatureMap& d_out);

// Mean absolute difference over all cells.
double L1Loss(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target);
// d L1Loss / d prediction; the gradient w.r.t. target is its negation.
Eigen::MatrixXd L1LossGrad(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target);

// L = (loss + siam) / 2 + cons.
double CompositeLoss(double loss, double siam, double cons);

}  // namespace umvc

#endif  // UMVC_LAYERS_H_
