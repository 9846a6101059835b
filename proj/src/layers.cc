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

#include "umvc/layers.h"

#include <cmath>
#include <string>

#include "umvc/error.h"

namespace umvc {

namespace {

std::string Shape(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

InstanceNormResult InstanceNorm(const FeatureMap& x, double epsilon) {
  if (x.cols() < 1) throw Error(ErrorKind::kShapeError, "instance norm needs T >= 1");
  InstanceNormResult r;
  r.mean = x.rowwise().mean();
  const FeatureMap centered = x.colwise() - r.mean;
  const Eigen::VectorXd var = centered.array().square().rowwise().mean();
  r.std = (var.array() + epsilon).sqrt();
  r.normalized = centered.array().colwise() / r.std.array();
  return r;
}

FeatureMap InstanceNormBackward(const InstanceNormResult& fwd, const FeatureMap& d_normalized,
                                const Eigen::VectorXd* d_mean, const Eigen::VectorXd* d_std) {
  const double T = static_cast<double>(fwd.normalized.cols());
  const FeatureMap& y = fwd.normalized;
  const Eigen::VectorXd mean_dy = d_normalized.rowwise().mean();
  const Eigen::VectorXd mean_dyy = (d_normalized.array() * y.array()).rowwise().mean();
  FeatureMap dx = ((d_normalized.colwise() - mean_dy).array() -
                   y.array().colwise() * mean_dyy.array())
                      .colwise() /
                  fwd.std.array();
  if (d_mean) dx.colwise() += *d_mean / T;
  // d std / d x_t = y_t / T
  if (d_std) dx.array() += y.array().colwise() * (d_std->array() / T);
  return dx;
}

Eigen::MatrixXd AttentionWeights(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& keys) {
  if (queries.rows() != keys.rows())
    throw Error(ErrorKind::kDimensionMismatch,
                "query dim " + Shape(queries) + " vs key dim " + Shape(keys));
  const double scale = 1.0 / std::sqrt(static_cast<double>(queries.rows()));
  Eigen::MatrixXd logits = (queries.transpose() * keys) * scale;
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  logits = (logits.colwise() - row_max).array().exp();
  const Eigen::VectorXd row_sum = logits.rowwise().sum();
  return logits.array().colwise() / row_sum.array();
}

AttentionGrads AttentionWeightsBackward(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& keys,
                                        const Eigen::MatrixXd& alpha,
                                        const Eigen::MatrixXd& d_alpha) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(queries.rows()));
  const Eigen::VectorXd inner = (d_alpha.array() * alpha.array()).rowwise().sum();
  const Eigen::MatrixXd d_logits =
      (alpha.array() * (d_alpha.colwise() - inner).array()).matrix() * scale;
  return {keys * d_logits.transpose(), queries * d_logits};
}

WeightedStatsResult WeightedStats(const FeatureMap& values, const Eigen::MatrixXd& alpha, Axis axis,
                                  double epsilon) {
  WeightedStatsResult r;
  if (axis == Axis::kTime) {
    if (alpha.cols() != values.cols())
      throw Error(ErrorKind::kDimensionMismatch,
                  "alpha " + Shape(alpha) + " vs values " + Shape(values));
    r.mean = values * alpha.transpose();
    const Eigen::MatrixXd second = values.array().square().matrix() * alpha.transpose();
    r.std = (second.array() - r.mean.array().square() + epsilon).sqrt();
  } else {
    if (alpha.rows() != values.rows() || alpha.cols() != values.rows())
      throw Error(ErrorKind::kDimensionMismatch,
                  "alpha " + Shape(alpha) + " vs values " + Shape(values));
    const Eigen::VectorXd mu = values.rowwise().mean();
    const Eigen::VectorXd m2 = values.array().square().rowwise().mean();
    r.mean = alpha * mu;
    const Eigen::VectorXd second = alpha * m2;
    r.std = (second.array() - r.mean.array().square() + epsilon).sqrt();
  }
  return r;
}

WeightedStatsGrads WeightedStatsBackward(const FeatureMap& values, const Eigen::MatrixXd& alpha,
                                         Axis axis, const WeightedStatsResult& fwd,
                                         const Eigen::MatrixXd& d_mean,
                                         const Eigen::MatrixXd& d_std) {
  WeightedStatsGrads g;
  const Eigen::MatrixXd d_second = d_std.array() / (2.0 * fwd.std.array());
  const Eigen::MatrixXd d_mean_total = d_mean.array() - 2.0 * fwd.mean.array() * d_second.array();
  if (axis == Axis::kTime) {
    const Eigen::MatrixXd sq = values.array().square();
    g.d_alpha = d_mean_total.transpose() * values + d_second.transpose() * sq;
    g.d_values = d_mean_total * alpha + 2.0 * (values.array() * (d_second * alpha).array()).matrix();
  } else {
    const double T = static_cast<double>(values.cols());
    const Eigen::VectorXd mu = values.rowwise().mean();
    const Eigen::VectorXd m2 = values.array().square().rowwise().mean();
    g.d_alpha = d_mean_total * mu.transpose() + d_second * m2.transpose();
    const Eigen::VectorXd d_mu = alpha.transpose() * d_mean_total;
    const Eigen::VectorXd d_m2 = alpha.transpose() * d_second;
    g.d_values = (2.0 / T) * (values.array().colwise() * d_m2.array()).matrix();
    g.d_values.colwise() += d_mu / T;
  }
  return g;
}

FeatureMap Conv1d(const Eigen::MatrixXd& weight, const Eigen::VectorXd& bias, const FeatureMap& x,
                  int kernel, Conv1dCache* cache) {
  const Eigen::Index in = x.rows(), T = x.cols();
  if (kernel < 1 || kernel % 2 == 0)
    throw Error(ErrorKind::kShapeError, "conv kernel must be odd");
  if (weight.cols() != kernel * in || weight.rows() != bias.size())
    throw Error(ErrorKind::kShapeError,
                "conv weight " + Shape(weight) + " does not fit input " + Shape(x));
  const int half = kernel / 2;
  Eigen::MatrixXd columns = Eigen::MatrixXd::Zero(kernel * in, T);
  for (int tap = 0; tap < kernel; ++tap) {
    const int shift = tap - half;
    const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index hi = std::min<Eigen::Index>(T, T - shift);
    if (hi > lo)
      columns.block(tap * in, lo, in, hi - lo) = x.block(0, lo + shift, in, hi - lo);
  }
  FeatureMap y = weight * columns;
  y.colwise() += bias;
  if (cache) {
    cache->columns = std::move(columns);
    cache->in_channels = static_cast<int>(in);
    cache->kernel = kernel;
  }
  return y;
}

Conv1dGrads Conv1dBackward(const Eigen::MatrixXd& weight, const Conv1dCache& cache,
                           const FeatureMap& d_out, bool need_input_grad) {
  Conv1dGrads g;
  g.d_weight = d_out * cache.columns.transpose();
  g.d_bias = d_out.rowwise().sum();
  if (!need_input_grad) return g;
  const Eigen::MatrixXd d_columns = weight.transpose() * d_out;
  const Eigen::Index in = cache.in_channels, T = d_out.cols();
  const int half = cache.kernel / 2;
  g.d_input = FeatureMap::Zero(in, T);
  for (int tap = 0; tap < cache.kernel; ++tap) {
    const int shift = tap - half;
    const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index hi = std::min<Eigen::Index>(T, T - shift);
    if (hi > lo)
      g.d_input.block(0, lo + shift, in, hi - lo) += d_columns.block(tap * in, lo, in, hi - lo);
  }
  return g;
}

FeatureMap Relu(const FeatureMap& x) { return x.cwiseMax(0.0); }

FeatureMap ReluBackward(const FeatureMap& pre_activation, const FeatureMap& d_out) {
  return (pre_activation.array() > 0.0).select(d_out, 0.0);
}

double L1Loss(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols())
    throw Error(ErrorKind::kShapeError,
                "l1 between " + Shape(prediction) + " and " + Shape(target));
  return (prediction - target).cwiseAbs().mean();
}

Eigen::MatrixXd L1LossGrad(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target) {
  const double n = static_cast<double>(prediction.size());
  return (prediction - target).unaryExpr([n](double d) {
    return d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0);
  });
}

double CompositeLoss(double loss, double siam, double cons) { return (loss + siam) / 2.0 + cons; }

}  // namespace umvc
