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

// Encoder-decoder conversion model.
//
//   content:  [conv -> relu -> instance norm] x content_layers -> conv bottleneck
//             to bottleneck_channels -> 1x1 conv back to channels
//   speaker:  [conv -> relu] x speaker_layers -> self-attention over time
//             (queries/keys from the instance-normalized features, residual)
//   stylize:  time-axis then channel-axis adaptive normalization, each
//             x' = IN(x) * S + M with (M, S) the attention-weighted statistics
//             of the speaker features
//   decoder:  [conv -> relu] x (decoder_layers - 1) -> linear conv to n_mels
//
// All feature maps are channels x frames; mels enter as n_mels x T.

#ifndef UMVC_MODEL_H_
#define UMVC_MODEL_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "umvc/layers.h"

namespace umvc {

struct ModelConfig {
  int n_mels = 80;
  int channels = 64;
  // Width of the content bottleneck between the content encoder and the
  // stylizer; the code is expanded back to `channels` by a 1x1 conv.
  int bottleneck_channels = 4;
  int content_layers = 3;
  int speaker_layers = 3;
  int decoder_layers = 3;
  int kernel = 3;
  int attention_dim = 32;
  double epsilon = kNormEpsilon;

  void Validate() const;
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Indices into ModelParams::tensors.
struct ParamLayout {
  std::vector<int> content_w, content_b;
  int bottleneck_w = -1, bottleneck_b = -1;
  int expand_w = -1, expand_b = -1;
  std::vector<int> speaker_w, speaker_b;
  int self_q = -1, self_k = -1, self_v = -1;
  int time_q = -1, time_k = -1;
  int chan_query_embed = -1, chan_key_embed = -1, chan_query_proj = -1, chan_key_proj = -1;
  std::vector<int> decoder_w, decoder_b;
};

using Gradients = std::vector<Eigen::MatrixXd>;

struct ModelParams {
  ModelConfig config;
  ParamLayout layout;
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> tensors;

  const Eigen::MatrixXd& operator[](int i) const { return tensors[i]; }

  // Flat enumeration over every trainable scalar.
  size_t NumScalars() const;
  double& Scalar(size_t flat);
  double Scalar(size_t flat) const;
  std::pair<std::string, int> ScalarName(size_t flat) const;

  Gradients ZeroGradients() const;
  // FNV-1a over the raw tensor bytes; used to log init identity.
  uint64_t Fingerprint() const;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init, rounded to float precision.
ModelParams InitParams(const ModelConfig& config, uint64_t seed);

// Empty tensors with the right names and shapes (for loading).
ModelParams ShapeParams(const ModelConfig& config);

struct ContentCache {
  std::vector<Conv1dCache> conv;
  std::vector<FeatureMap> pre;  // pre-activation
  std::vector<InstanceNormResult> norm;
  Conv1dCache bottleneck;
  Conv1dCache expand;
};

struct SpeakerCache {
  std::vector<Conv1dCache> conv;
  std::vector<FeatureMap> pre;
  FeatureMap hidden;
  InstanceNormResult hidden_norm;
  Eigen::MatrixXd queries, keys, values, attention;
};

struct DuanTimeCache {
  InstanceNormResult content_norm;
  InstanceNormResult speaker_norm;
  Eigen::MatrixXd queries, keys, alpha;
  WeightedStatsResult stats;
};

struct DuanChannelCache {
  InstanceNormResult content_norm;
  Eigen::VectorXd speaker_mean, speaker_var, speaker_std;
  Eigen::MatrixXd query_desc, key_desc;  // 2 x C: rows (mean, std)
  Eigen::MatrixXd queries, keys, alpha;
  WeightedStatsResult stats;
};

struct DuanCache {
  DuanTimeCache time;
  FeatureMap after_time;
  DuanChannelCache channel;
};

struct DecoderCache {
  std::vector<Conv1dCache> conv;
  std::vector<FeatureMap> pre;
};

struct ForwardCache {
  ContentCache content;
  SpeakerCache speaker;
  FeatureMap speaker_features;
  DuanCache duan;
  DecoderCache decoder;
};

// Content path up to and including the bottleneck expansion.
FeatureMap ContentEncode(const ModelParams& p, const FeatureMap& mel, ContentCache* cache = nullptr);
FeatureMap SpeakerEncode(const ModelParams& p, const FeatureMap& mel, SpeakerCache* cache = nullptr);
FeatureMap DuanStylize(const ModelParams& p, const FeatureMap& content, const FeatureMap& speaker,
                       DuanCache* cache = nullptr);
FeatureMap Decode(const ModelParams& p, const FeatureMap& styled, DecoderCache* cache = nullptr);

// Decode(Duan(content_encode(content_mel), speaker_encode(speaker_mel))).
// Inputs are n_mels x frames; any speaker-input masking is applied by the
// caller. Output is n_mels x content frames.
FeatureMap Predict(const ModelParams& p, const FeatureMap& content_mel,
                   const FeatureMap& speaker_mel, ForwardCache* cache = nullptr);

// Accumulates d(prediction) into grads.
void PredictBackward(const ModelParams& p, const ForwardCache& cache, const FeatureMap& d_prediction,
                     Gradients& grads);

// Stage-level backward passes; each accumulates parameter gradients and
// returns input gradients.
FeatureMap DecodeBackward(const ModelParams& p, const DecoderCache& cache, const FeatureMap& d_out,
                          Gradients& grads);
// Returns (d content, d speaker).
std::pair<FeatureMap, FeatureMap> DuanBackward(const ModelParams& p, const FeatureMap& speaker,
                                               const DuanCache& cache, const FeatureMap& d_out,
                                               Gradients& grads);
void ContentBackward(const ModelParams& p, const ContentCache& cache, const FeatureMap& d_out,
                     Gradients& grads);
void SpeakerBackward(const ModelParams& p, const SpeakerCache& cache, const FeatureMap& d_out,
                     Gradients& grads);

}  // namespace umvc

#endif  // UMVC_MODEL_H_
