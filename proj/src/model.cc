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

#include "umvc/model.h"

#include <cmath>
#include <cstring>

#include "umvc/error.h"
#include "umvc/io.h"
#include "umvc/rng.h"

namespace umvc {

void ModelConfig::Validate() const {
  auto positive = [](int v) { return v >= 1; };
  if (!positive(n_mels) || !positive(channels) || !positive(content_layers) ||
      !positive(speaker_layers) || !positive(decoder_layers) || !positive(attention_dim))
    throw Error(ErrorKind::kConfigInvalid, "model sizes must be positive");
  if (bottleneck_channels < 1 || bottleneck_channels > channels)
    throw Error(ErrorKind::kConfigInvalid, "bottleneck_channels must be in [1, channels]");
  if (kernel < 1 || kernel % 2 == 0) throw Error(ErrorKind::kConfigInvalid, "kernel must be odd");
  if (!(epsilon > 0.0)) throw Error(ErrorKind::kConfigInvalid, "epsilon must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"n_mels", c.n_mels},
       {"channels", c.channels},
       {"bottleneck_channels", c.bottleneck_channels},
       {"content_layers", c.content_layers},
       {"speaker_layers", c.speaker_layers},
       {"decoder_layers", c.decoder_layers},
       {"kernel", c.kernel},
       {"attention_dim", c.attention_dim},
       {"epsilon", c.epsilon}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.n_mels = j.value("n_mels", d.n_mels);
  c.channels = j.value("channels", d.channels);
  c.bottleneck_channels = j.value("bottleneck_channels", d.bottleneck_channels);
  c.content_layers = j.value("content_layers", d.content_layers);
  c.speaker_layers = j.value("speaker_layers", d.speaker_layers);
  c.decoder_layers = j.value("decoder_layers", d.decoder_layers);
  c.kernel = j.value("kernel", d.kernel);
  c.attention_dim = j.value("attention_dim", d.attention_dim);
  c.epsilon = j.value("epsilon", d.epsilon);
}

size_t ModelParams::NumScalars() const {
  size_t n = 0;
  for (const auto& t : tensors) n += static_cast<size_t>(t.size());
  return n;
}

namespace {

template <typename Tensors>
auto Locate(Tensors& tensors, size_t flat) -> std::pair<size_t, Eigen::Index> {
  for (size_t i = 0; i < tensors.size(); ++i) {
    const auto n = static_cast<size_t>(tensors[i].size());
    if (flat < n) return {i, static_cast<Eigen::Index>(flat)};
    flat -= n;
  }
  throw Error(ErrorKind::kShapeError, "flat parameter index out of range");
}

}  // namespace

double& ModelParams::Scalar(size_t flat) {
  const auto [i, j] = Locate(tensors, flat);
  return tensors[i].data()[j];
}

double ModelParams::Scalar(size_t flat) const {
  const auto [i, j] = Locate(tensors, flat);
  return tensors[i].data()[j];
}

std::pair<std::string, int> ModelParams::ScalarName(size_t flat) const {
  const auto [i, j] = Locate(tensors, flat);
  return {names[i], static_cast<int>(j)};
}

Gradients ModelParams::ZeroGradients() const {
  Gradients g;
  g.reserve(tensors.size());
  for (const auto& t : tensors) g.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
  return g;
}

uint64_t ModelParams::Fingerprint() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tensors) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const float v = static_cast<float>(t.data()[i]);
      uint32_t bits;
      std::memcpy(&bits, &v, 4);
      for (int b = 0; b < 4; ++b) {
        h ^= (bits >> (8 * b)) & 0xffu;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

namespace {

struct Spec {
  std::string name;
  int rows, cols, fan_in;
};

void Build(const ModelConfig& c, ModelParams& p, std::vector<Spec>& specs) {
  c.Validate();
  p.config = c;
  p.layout = {};
  const int C = c.channels, k = c.kernel, d = c.attention_dim;
  auto add = [&](const std::string& name, int rows, int cols, int fan_in) {
    specs.push_back({name, rows, cols, fan_in});
    return static_cast<int>(specs.size()) - 1;
  };
  auto conv = [&](const std::string& prefix, int out, int in, std::vector<int>& ws,
                  std::vector<int>& bs) {
    ws.push_back(add(prefix + ".weight", out, k * in, k * in));
    bs.push_back(add(prefix + ".bias", out, 1, k * in));
  };
  for (int l = 0; l < c.content_layers; ++l)
    conv("content.conv" + std::to_string(l), C, l == 0 ? c.n_mels : C, p.layout.content_w,
         p.layout.content_b);
  const int B = c.bottleneck_channels;
  p.layout.bottleneck_w = add("bottleneck.weight", B, k * C, k * C);
  p.layout.bottleneck_b = add("bottleneck.bias", B, 1, k * C);
  p.layout.expand_w = add("bottleneck.expand.weight", C, B, B);
  p.layout.expand_b = add("bottleneck.expand.bias", C, 1, B);
  for (int l = 0; l < c.speaker_layers; ++l)
    conv("speaker.conv" + std::to_string(l), C, l == 0 ? c.n_mels : C, p.layout.speaker_w,
         p.layout.speaker_b);
  p.layout.self_q = add("speaker.attn.query", d, C, C);
  p.layout.self_k = add("speaker.attn.key", d, C, C);
  p.layout.self_v = add("speaker.attn.value", C, C, C);
  p.layout.time_q = add("duan.time.query", d, C, C);
  p.layout.time_k = add("duan.time.key", d, C, C);
  p.layout.chan_query_embed = add("duan.channel.query_embed", d, C, 1);
  p.layout.chan_key_embed = add("duan.channel.key_embed", d, C, 1);
  p.layout.chan_query_proj = add("duan.channel.query_proj", d, 2, 2);
  p.layout.chan_key_proj = add("duan.channel.key_proj", d, 2, 2);
  for (int l = 0; l < c.decoder_layers; ++l) {
    const int out = l + 1 == c.decoder_layers ? c.n_mels : C;
    conv("decoder.conv" + std::to_string(l), out, C, p.layout.decoder_w, p.layout.decoder_b);
  }
  for (const Spec& s : specs) {
    p.names.push_back(s.name);
    p.tensors.emplace_back(s.rows, s.cols);
  }
}

}  // namespace

ModelParams ShapeParams(const ModelConfig& config) {
  ModelParams p;
  std::vector<Spec> specs;
  Build(config, p, specs);
  for (auto& t : p.tensors) t.setZero();
  return p;
}

ModelParams InitParams(const ModelConfig& config, uint64_t seed) {
  ModelParams p;
  std::vector<Spec> specs;
  Build(config, p, specs);
  Rng rng = MakeRng(seed, {0x696e6974});
  for (size_t i = 0; i < specs.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(specs[i].fan_in));
    Eigen::MatrixXd& t = p.tensors[i];
    for (Eigen::Index j = 0; j < t.size(); ++j) t.data()[j] = UniformRange(rng, -bound, bound);
    RoundToFloat(t);
  }
  return p;
}

FeatureMap ContentEncode(const ModelParams& p, const FeatureMap& mel, ContentCache* cache) {
  const ParamLayout& L = p.layout;
  const int k = p.config.kernel;
  if (mel.rows() != p.config.n_mels)
    throw Error(ErrorKind::kShapeError, "content input has " + std::to_string(mel.rows()) +
                                            " mel bins, model expects " +
                                            std::to_string(p.config.n_mels));
  FeatureMap h = mel;
  for (size_t l = 0; l < L.content_w.size(); ++l) {
    Conv1dCache cc;
    FeatureMap pre = Conv1d(p[L.content_w[l]], p[L.content_b[l]], h, k, cache ? &cc : nullptr);
    InstanceNormResult norm = InstanceNorm(Relu(pre), p.config.epsilon);
    h = norm.normalized;
    if (cache) {
      cache->conv.push_back(std::move(cc));
      cache->pre.push_back(std::move(pre));
      cache->norm.push_back(std::move(norm));
    }
  }
  const FeatureMap code =
      Conv1d(p[L.bottleneck_w], p[L.bottleneck_b], h, k, cache ? &cache->bottleneck : nullptr);
  return Conv1d(p[L.expand_w], p[L.expand_b], code, 1, cache ? &cache->expand : nullptr);
}

FeatureMap SpeakerEncode(const ModelParams& p, const FeatureMap& mel, SpeakerCache* cache) {
  const ParamLayout& L = p.layout;
  const int k = p.config.kernel;
  if (mel.rows() != p.config.n_mels)
    throw Error(ErrorKind::kShapeError, "speaker input has " + std::to_string(mel.rows()) +
                                            " mel bins, model expects " +
                                            std::to_string(p.config.n_mels));
  FeatureMap h = mel;
  for (size_t l = 0; l < L.speaker_w.size(); ++l) {
    Conv1dCache cc;
    FeatureMap pre = Conv1d(p[L.speaker_w[l]], p[L.speaker_b[l]], h, k, cache ? &cc : nullptr);
    h = Relu(pre);
    if (cache) {
      cache->conv.push_back(std::move(cc));
      cache->pre.push_back(std::move(pre));
    }
  }
  InstanceNormResult hn = InstanceNorm(h, p.config.epsilon);
  Eigen::MatrixXd q = p[L.self_q] * hn.normalized;
  Eigen::MatrixXd kk = p[L.self_k] * hn.normalized;
  Eigen::MatrixXd v = p[L.self_v] * h;
  Eigen::MatrixXd a = AttentionWeights(q, kk);
  FeatureMap out = h + v * a.transpose();
  if (cache) {
    cache->hidden = std::move(h);
    cache->hidden_norm = std::move(hn);
    cache->queries = std::move(q);
    cache->keys = std::move(kk);
    cache->values = std::move(v);
    cache->attention = std::move(a);
  }
  return out;
}

FeatureMap DuanStylize(const ModelParams& p, const FeatureMap& content, const FeatureMap& speaker,
                       DuanCache* cache) {
  const ParamLayout& L = p.layout;
  const double eps = p.config.epsilon;
  if (content.rows() != speaker.rows())
    throw Error(ErrorKind::kDimensionMismatch, "content and speaker channel widths differ");

  // Time axis: each content frame attends over speaker frames.
  DuanTimeCache tc;
  tc.content_norm = InstanceNorm(content, eps);
  tc.speaker_norm = InstanceNorm(speaker, eps);
  tc.queries = p[L.time_q] * tc.content_norm.normalized;
  tc.keys = p[L.time_k] * tc.speaker_norm.normalized;
  tc.alpha = AttentionWeights(tc.queries, tc.keys);
  tc.stats = WeightedStats(speaker, tc.alpha, Axis::kTime, eps);
  FeatureMap after_time =
      (tc.content_norm.normalized.array() * tc.stats.std.array() + tc.stats.mean.array()).matrix();

  // Channel axis: each content channel attends over speaker channels, both
  // described by their (mean, std) over time plus a learned channel embedding.
  DuanChannelCache cc;
  cc.content_norm = InstanceNorm(after_time, eps);
  cc.speaker_mean = speaker.rowwise().mean();
  cc.speaker_var = (speaker.colwise() - cc.speaker_mean).array().square().rowwise().mean();
  cc.speaker_std = (cc.speaker_var.array() + eps).sqrt();
  cc.query_desc.resize(2, content.rows());
  cc.query_desc.row(0) = cc.content_norm.mean.transpose();
  cc.query_desc.row(1) = cc.content_norm.std.transpose();
  cc.key_desc.resize(2, content.rows());
  cc.key_desc.row(0) = cc.speaker_mean.transpose();
  cc.key_desc.row(1) = cc.speaker_std.transpose();
  cc.queries = p[L.chan_query_embed] + p[L.chan_query_proj] * cc.query_desc;
  cc.keys = p[L.chan_key_embed] + p[L.chan_key_proj] * cc.key_desc;
  cc.alpha = AttentionWeights(cc.queries, cc.keys);
  cc.stats = WeightedStats(speaker, cc.alpha, Axis::kChannel, eps);
  FeatureMap out = (cc.content_norm.normalized.array().colwise() * cc.stats.std.col(0).array())
                       .matrix();
  out.colwise() += cc.stats.mean.col(0);

  if (cache) {
    cache->time = std::move(tc);
    cache->after_time = std::move(after_time);
    cache->channel = std::move(cc);
  }
  return out;
}

FeatureMap Decode(const ModelParams& p, const FeatureMap& styled, DecoderCache* cache) {
  const ParamLayout& L = p.layout;
  const int k = p.config.kernel;
  if (styled.rows() != p.config.channels)
    throw Error(ErrorKind::kShapeError, "decoder input has " + std::to_string(styled.rows()) +
                                            " channels, model expects " +
                                            std::to_string(p.config.channels));
  FeatureMap h = styled;
  const size_t n = L.decoder_w.size();
  for (size_t l = 0; l < n; ++l) {
    Conv1dCache cc;
    FeatureMap pre = Conv1d(p[L.decoder_w[l]], p[L.decoder_b[l]], h, k, cache ? &cc : nullptr);
    h = l + 1 == n ? pre : Relu(pre);
    if (cache) {
      cache->conv.push_back(std::move(cc));
      cache->pre.push_back(std::move(pre));
    }
  }
  return h;
}

FeatureMap Predict(const ModelParams& p, const FeatureMap& content_mel,
                   const FeatureMap& speaker_mel, ForwardCache* cache) {
  const FeatureMap content = ContentEncode(p, content_mel, cache ? &cache->content : nullptr);
  FeatureMap speaker = SpeakerEncode(p, speaker_mel, cache ? &cache->speaker : nullptr);
  const FeatureMap styled = DuanStylize(p, content, speaker, cache ? &cache->duan : nullptr);
  if (cache) cache->speaker_features = std::move(speaker);
  return Decode(p, styled, cache ? &cache->decoder : nullptr);
}

FeatureMap DecodeBackward(const ModelParams& p, const DecoderCache& cache, const FeatureMap& d_out,
                          Gradients& grads) {
  const ParamLayout& L = p.layout;
  FeatureMap d = d_out;
  for (size_t l = L.decoder_w.size(); l-- > 0;) {
    if (l + 1 != L.decoder_w.size()) d = ReluBackward(cache.pre[l], d);
    Conv1dGrads g = Conv1dBackward(p[L.decoder_w[l]], cache.conv[l], d);
    grads[L.decoder_w[l]] += g.d_weight;
    grads[L.decoder_b[l]] += g.d_bias;
    d = std::move(g.d_input);
  }
  return d;
}

std::pair<FeatureMap, FeatureMap> DuanBackward(const ModelParams& p, const FeatureMap& speaker,
                                               const DuanCache& cache, const FeatureMap& d_out,
                                               Gradients& grads) {
  const ParamLayout& L = p.layout;
  const DuanChannelCache& cc = cache.channel;
  const DuanTimeCache& tc = cache.time;
  const double T_speaker = static_cast<double>(speaker.cols());

  // Channel stage.
  const Eigen::VectorXd s_chan = cc.stats.std.col(0);
  FeatureMap d_yn = (d_out.array().colwise() * s_chan.array()).matrix();
  Eigen::MatrixXd d_s_chan = (d_out.array() * cc.content_norm.normalized.array()).rowwise().sum();
  Eigen::MatrixXd d_m_chan = d_out.rowwise().sum();
  WeightedStatsGrads wc =
      WeightedStatsBackward(speaker, cc.alpha, Axis::kChannel, cc.stats, d_m_chan, d_s_chan);
  FeatureMap d_speaker = std::move(wc.d_values);
  AttentionGrads ac = AttentionWeightsBackward(cc.queries, cc.keys, cc.alpha, wc.d_alpha);
  grads[L.chan_query_embed] += ac.d_queries;
  grads[L.chan_query_proj] += ac.d_queries * cc.query_desc.transpose();
  grads[L.chan_key_embed] += ac.d_keys;
  grads[L.chan_key_proj] += ac.d_keys * cc.key_desc.transpose();
  const Eigen::MatrixXd d_qdesc = p[L.chan_query_proj].transpose() * ac.d_queries;
  const Eigen::MatrixXd d_kdesc = p[L.chan_key_proj].transpose() * ac.d_keys;
  const Eigen::VectorXd d_spk_mean = d_kdesc.row(0).transpose();
  const Eigen::VectorXd d_spk_var =
      (d_kdesc.row(1).transpose().array() / (2.0 * cc.speaker_std.array())).matrix();
  d_speaker.colwise() += d_spk_mean / T_speaker;
  d_speaker += ((speaker.colwise() - cc.speaker_mean).array().colwise() *
                (2.0 * d_spk_var.array() / T_speaker))
                   .matrix();
  const Eigen::VectorXd d_y_mean = d_qdesc.row(0).transpose();
  const Eigen::VectorXd d_y_std = d_qdesc.row(1).transpose();
  const FeatureMap d_after_time =
      InstanceNormBackward(cc.content_norm, d_yn, &d_y_mean, &d_y_std);

  // Time stage.
  FeatureMap d_xn = (d_after_time.array() * tc.stats.std.array()).matrix();
  const Eigen::MatrixXd d_s_time = d_after_time.array() * tc.content_norm.normalized.array();
  WeightedStatsGrads wt =
      WeightedStatsBackward(speaker, tc.alpha, Axis::kTime, tc.stats, d_after_time, d_s_time);
  d_speaker += wt.d_values;
  AttentionGrads at = AttentionWeightsBackward(tc.queries, tc.keys, tc.alpha, wt.d_alpha);
  grads[L.time_q] += at.d_queries * tc.content_norm.normalized.transpose();
  d_xn += p[L.time_q].transpose() * at.d_queries;
  grads[L.time_k] += at.d_keys * tc.speaker_norm.normalized.transpose();
  d_speaker += InstanceNormBackward(tc.speaker_norm, p[L.time_k].transpose() * at.d_keys);
  FeatureMap d_content = InstanceNormBackward(tc.content_norm, d_xn);
  return {std::move(d_content), std::move(d_speaker)};
}

void ContentBackward(const ModelParams& p, const ContentCache& cache, const FeatureMap& d_out,
                     Gradients& grads) {
  const ParamLayout& L = p.layout;
  Conv1dGrads ge = Conv1dBackward(p[L.expand_w], cache.expand, d_out);
  grads[L.expand_w] += ge.d_weight;
  grads[L.expand_b] += ge.d_bias;
  Conv1dGrads gb = Conv1dBackward(p[L.bottleneck_w], cache.bottleneck, ge.d_input);
  grads[L.bottleneck_w] += gb.d_weight;
  grads[L.bottleneck_b] += gb.d_bias;
  FeatureMap d = std::move(gb.d_input);
  for (size_t l = L.content_w.size(); l-- > 0;) {
    d = ReluBackward(cache.pre[l], InstanceNormBackward(cache.norm[l], d));
    Conv1dGrads g = Conv1dBackward(p[L.content_w[l]], cache.conv[l], d, l > 0);
    grads[L.content_w[l]] += g.d_weight;
    grads[L.content_b[l]] += g.d_bias;
    d = std::move(g.d_input);
  }
}

void SpeakerBackward(const ModelParams& p, const SpeakerCache& cache, const FeatureMap& d_out,
                     Gradients& grads) {
  const ParamLayout& L = p.layout;
  FeatureMap d_hidden = d_out;
  const Eigen::MatrixXd d_values = d_out * cache.attention;
  const Eigen::MatrixXd d_attention = d_out.transpose() * cache.values;
  AttentionGrads ag =
      AttentionWeightsBackward(cache.queries, cache.keys, cache.attention, d_attention);
  grads[L.self_q] += ag.d_queries * cache.hidden_norm.normalized.transpose();
  grads[L.self_k] += ag.d_keys * cache.hidden_norm.normalized.transpose();
  grads[L.self_v] += d_values * cache.hidden.transpose();
  const FeatureMap d_hn =
      p[L.self_q].transpose() * ag.d_queries + p[L.self_k].transpose() * ag.d_keys;
  d_hidden += p[L.self_v].transpose() * d_values;
  d_hidden += InstanceNormBackward(cache.hidden_norm, d_hn);
  FeatureMap d = std::move(d_hidden);
  for (size_t l = L.speaker_w.size(); l-- > 0;) {
    d = ReluBackward(cache.pre[l], d);
    Conv1dGrads g = Conv1dBackward(p[L.speaker_w[l]], cache.conv[l], d, l > 0);
    grads[L.speaker_w[l]] += g.d_weight;
    grads[L.speaker_b[l]] += g.d_bias;
    d = std::move(g.d_input);
  }
}

void PredictBackward(const ModelParams& p, const ForwardCache& cache,
                     const FeatureMap& d_prediction, Gradients& grads) {
  const FeatureMap d_styled = DecodeBackward(p, cache.decoder, d_prediction, grads);
  auto [d_content, d_speaker] =
      DuanBackward(p, cache.speaker_features, cache.duan, d_styled, grads);
  ContentBackward(p, cache.content, d_content, grads);
  SpeakerBackward(p, cache.speaker, d_speaker, grads);
}

}  // namespace umvc
