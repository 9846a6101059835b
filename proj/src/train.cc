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

#include "umvc/train.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "umvc/error.h"
#include "umvc/io.h"
#include "umvc/rng.h"

namespace umvc {

namespace {

MaskRule ParseRule(const std::string& s) {
  if (s == "none") return MaskRule::kNone;
  if (s == "unit" || s == "unit_classes") return MaskRule::kUnitClasses;
  if (s == "random" || s == "random_time") return MaskRule::kRandomTime;
  throw Error(ErrorKind::kConfigInvalid, "unknown mask rule \"" + s + "\"");
}

}  // namespace

void TrainConfig::Validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::kConfigInvalid, "learning_rate must be positive");
  if (batch_size < 1 || steps < 0 || segment_len < 1 || threads < 1)
    throw Error(ErrorKind::kConfigInvalid, "batch_size, segment_len and threads must be positive");
  if (speaker_mask_ratio < 0.0 || speaker_mask_ratio > 1.0 || siamese_mask_ratio < 0.0 ||
      siamese_mask_ratio > 1.0)
    throw Error(ErrorKind::kConfigInvalid, "mask ratios must lie in [0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_epsilon > 0.0))
    throw Error(ErrorKind::kConfigInvalid, "invalid Adam hyperparameters");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate},
       {"batch_size", c.batch_size},
       {"steps", c.steps},
       {"segment_len", c.segment_len},
       {"speaker_mask", MaskRuleName(c.speaker_mask)},
       {"speaker_mask_ratio", c.speaker_mask_ratio},
       {"siamese_mask_ratio", c.siamese_mask_ratio},
       {"seed", c.seed},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"adam_epsilon", c.adam_epsilon},
       {"threads", c.threads}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.steps = j.value("steps", d.steps);
  c.segment_len = j.value("segment_len", d.segment_len);
  c.speaker_mask = ParseRule(j.value("speaker_mask", std::string("none")));
  c.speaker_mask_ratio = j.value("speaker_mask_ratio", d.speaker_mask_ratio);
  c.siamese_mask_ratio = j.value("siamese_mask_ratio", d.siamese_mask_ratio);
  c.seed = j.value("seed", d.seed);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.adam_epsilon = j.value("adam_epsilon", d.adam_epsilon);
  c.threads = j.value("threads", d.threads);
}

AdamState AdamState::ZerosLike(const ModelParams& params) {
  AdamState s;
  s.m = params.ZeroGradients();
  s.v = params.ZeroGradients();
  return s;
}

void AdamStep(ModelParams& params, const Gradients& grads, AdamState& state, double lr,
              double beta1, double beta2, double epsilon) {
  if (grads.size() != params.tensors.size() || state.m.size() != params.tensors.size())
    throw Error(ErrorKind::kShapeError, "gradient/state layout does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.tensors.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i].cwiseAbs2();
    params.tensors[i].array() -=
        lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + epsilon);
  }
}

ItemPlan DrawItemPlan(const TrainingItem& item, const TrainConfig& config, int64_t step,
                      uint64_t item_id) {
  Rng rng = MakeRng(config.seed, {0x706c616e, static_cast<uint64_t>(step), item_id});
  const int T = static_cast<int>(item.mel.rows());
  ItemPlan plan;
  plan.crop_length = std::min(T, config.segment_len);
  // Unit crops start on a unit boundary.
  const int align = config.speaker_mask == MaskRule::kUnitClasses ? std::max(1, item.units.rate_factor) : 1;
  plan.crop_start = T > config.segment_len
                        ? align * static_cast<int>(UniformIndex(rng, (T - config.segment_len) / align + 1))
                        : 0;
  const int n = plan.crop_length;
  switch (config.speaker_mask) {
    case MaskRule::kNone:
      plan.speaker = PlanNone(n);
      break;
    case MaskRule::kRandomTime:
      plan.speaker = PlanRandomTimeMask(n, config.speaker_mask_ratio, rng);
      break;
    case MaskRule::kUnitClasses: {
      const int factor = item.units.rate_factor;
      if (item.units.size() * factor != T)
        throw Error(ErrorKind::kPlanMismatch, "unit sequence does not cover the item's frames");
      if (plan.crop_start % factor != 0 || n % factor != 0)
        throw Error(ErrorKind::kPlanMismatch, "crop is not aligned to the unit rate");
      UnitSequence cropped = item.units;
      cropped.labels.assign(item.units.labels.begin() + plan.crop_start / factor,
                            item.units.labels.begin() + (plan.crop_start + n) / factor);
      const std::vector<int> classes =
          SelectMaskClasses(UnitSet(cropped), config.speaker_mask_ratio, rng);
      plan.speaker = PlanUnitMask(cropped, classes, factor);
      break;
    }
  }
  plan.siamese = PlanRandomTimeMask(n, config.siamese_mask_ratio, rng);
  return plan;
}

LossBreakdown ItemLossAndGrad(const ModelParams& params, const TrainingItem& item,
                              const ItemPlan& plan, int segment_len, Gradients* grads) {
  const Eigen::MatrixXd segment = item.mel.middleRows(plan.crop_start, plan.crop_length);
  const FeatureMap target = segment.transpose();
  const FeatureMap speaker_in = ApplyMask(segment, plan.speaker, segment_len).transpose();
  const FeatureMap siam_content = ZeroMasked(segment, plan.siamese).transpose();
  const FeatureMap siam_speaker = ApplyMask(segment, plan.siamese, segment_len).transpose();

  ForwardCache main_cache, siam_cache;
  const FeatureMap y_hat = Predict(params, target, speaker_in, grads ? &main_cache : nullptr);
  const FeatureMap y_siam =
      Predict(params, siam_content, siam_speaker, grads ? &siam_cache : nullptr);

  LossBreakdown out;
  out.loss = L1Loss(y_hat, target);
  out.siam = L1Loss(y_siam, target);
  out.cons = L1Loss(y_hat, y_siam);
  out.total = CompositeLoss(out.loss, out.siam, out.cons);
  if (grads) {
    const Eigen::MatrixXd d_cons = L1LossGrad(y_hat, y_siam);
    const FeatureMap d_hat = 0.5 * L1LossGrad(y_hat, target) + d_cons;
    const FeatureMap d_siam = 0.5 * L1LossGrad(y_siam, target) - d_cons;
    PredictBackward(params, main_cache, d_hat, *grads);
    PredictBackward(params, siam_cache, d_siam, *grads);
  }
  return out;
}

LossBreakdown BatchLossAndGrad(const ModelParams& params,
                               const std::vector<const TrainingItem*>& batch,
                               const std::vector<ItemPlan>& plans, int segment_len,
                               Gradients* grads, int threads) {
  const size_t n = batch.size();
  if (n == 0 || plans.size() != n) throw Error(ErrorKind::kShapeError, "empty or mismatched batch");
  std::vector<LossBreakdown> losses(n);
  std::vector<Gradients> item_grads(grads ? n : 0);

  auto work = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      Gradients* g = nullptr;
      if (grads) {
        item_grads[i] = params.ZeroGradients();
        g = &item_grads[i];
      }
      losses[i] = ItemLossAndGrad(params, *batch[i], plans[i], segment_len, g);
    }
  };
  const size_t workers = std::min<size_t>(std::max(threads, 1), n);
  if (workers <= 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w)
      pool.emplace_back(work, n * w / workers, n * (w + 1) / workers);
    for (auto& t : pool) t.join();
  }

  LossBreakdown mean;
  for (const auto& l : losses) {
    mean.loss += l.loss;
    mean.siam += l.siam;
    mean.cons += l.cons;
    mean.total += l.total;
  }
  const double inv = 1.0 / static_cast<double>(n);
  mean.loss *= inv;
  mean.siam *= inv;
  mean.cons *= inv;
  mean.total *= inv;
  if (grads) {
    *grads = params.ZeroGradients();
    for (const Gradients& g : item_grads)
      for (size_t t = 0; t < g.size(); ++t) (*grads)[t] += g[t];
    for (auto& g : *grads) g *= inv;
  }
  return mean;
}

std::vector<int> BatchIndices(int dataset_size, const TrainConfig& config, int64_t step) {
  if (dataset_size < 1) throw Error(ErrorKind::kShapeError, "empty training set");
  const int per_epoch = (dataset_size + config.batch_size - 1) / config.batch_size;
  const int64_t epoch = step / per_epoch;
  const int pos = static_cast<int>(step % per_epoch);
  std::vector<int> perm(dataset_size);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = MakeRng(config.seed, {0x65706f63, static_cast<uint64_t>(epoch)});
  for (int i = dataset_size - 1; i > 0; --i)
    std::swap(perm[i], perm[UniformIndex(rng, static_cast<uint64_t>(i) + 1)]);
  const int begin = pos * config.batch_size;
  const int end = std::min(dataset_size, begin + config.batch_size);
  return {perm.begin() + begin, perm.begin() + end};
}

StepResult TrainingStep(const std::vector<TrainingItem>& dataset, ModelParams& params,
                        AdamState& adam, const TrainConfig& config) {
  StepResult result;
  result.items = BatchIndices(static_cast<int>(dataset.size()), config, adam.step);
  std::vector<const TrainingItem*> batch;
  std::vector<ItemPlan> plans;
  for (int id : result.items) {
    batch.push_back(&dataset[id]);
    plans.push_back(DrawItemPlan(dataset[id], config, adam.step, static_cast<uint64_t>(id)));
  }
  Gradients grads;
  result.loss = BatchLossAndGrad(params, batch, plans, config.segment_len, &grads, config.threads);
  if (!std::isfinite(result.loss.total))
    throw Error(ErrorKind::kNonFiniteLoss,
                "step " + std::to_string(adam.step) + ": loss=" + std::to_string(result.loss.loss) +
                    " siam=" + std::to_string(result.loss.siam) +
                    " cons=" + std::to_string(result.loss.cons));
  AdamStep(params, grads, adam, config.learning_rate, config.beta1, config.beta2,
           config.adam_epsilon);
  for (auto& t : params.tensors) RoundToFloat(t);
  for (auto& t : adam.m) RoundToFloat(t);
  for (auto& t : adam.v) RoundToFloat(t);
  return result;
}

Eigen::MatrixXd Convert(const ModelParams& params, const Eigen::MatrixXd& source,
                        const Eigen::MatrixXd& reference, int segment_len) {
  const int T = static_cast<int>(reference.rows());
  const Eigen::MatrixXd speaker_in = ApplyMask(reference, PlanNone(T), std::max(T, segment_len));
  return Predict(params, source.transpose(), speaker_in.transpose()).transpose();
}

namespace {

void PutTensor(ByteWriter& w, const std::string& name, const Eigen::MatrixXd& t) {
  w.U32(static_cast<uint32_t>(name.size()));
  w.Bytes(name);
  w.U32(2);
  w.U32(static_cast<uint32_t>(t.rows()));
  w.U32(static_cast<uint32_t>(t.cols()));
  for (Eigen::Index r = 0; r < t.rows(); ++r)
    for (Eigen::Index c = 0; c < t.cols(); ++c) w.F32(static_cast<float>(t(r, c)));
}

}  // namespace

std::string EncodeCheckpoint(const Checkpoint& ckpt) {
  nlohmann::json header = {{"model", ckpt.params.config},
                           {"train", ckpt.train},
                           {"step", ckpt.adam.step},
                           {"extra", ckpt.extra}};
  const std::string blob = header.dump();
  ByteWriter w;
  w.Magic("UMCK");
  w.U32(kCheckpointFormatVersion);
  w.U32(static_cast<uint32_t>(blob.size()));
  w.Bytes(blob);
  const size_t n = ckpt.params.tensors.size();
  w.U32(static_cast<uint32_t>(3 * n));
  for (size_t i = 0; i < n; ++i) PutTensor(w, ckpt.params.names[i], ckpt.params.tensors[i]);
  for (size_t i = 0; i < n; ++i) PutTensor(w, "adam.m." + ckpt.params.names[i], ckpt.adam.m[i]);
  for (size_t i = 0; i < n; ++i) PutTensor(w, "adam.v." + ckpt.params.names[i], ckpt.adam.v[i]);
  return w.data();
}

Checkpoint DecodeCheckpoint(std::string bytes, const std::string& source) {
  ByteReader r(std::move(bytes), source);
  r.ExpectMagic("UMCK");
  if (const uint32_t v = r.U32(); v != kCheckpointFormatVersion)
    throw Error(ErrorKind::kFormat, source + ": unsupported checkpoint version " + std::to_string(v));
  const uint32_t blob_len = r.U32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.Bytes(blob_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, source + ": bad header: " + e.what());
  }
  Checkpoint ckpt;
  ckpt.params = ShapeParams(header.at("model").get<ModelConfig>());
  ckpt.train = header.at("train").get<TrainConfig>();
  ckpt.extra = header.value("extra", nlohmann::json::object());
  ckpt.adam = AdamState::ZerosLike(ckpt.params);
  ckpt.adam.step = header.at("step").get<int64_t>();

  const size_t n = ckpt.params.tensors.size();
  const uint32_t count = r.U32();
  if (count != 3 * n)
    throw Error(ErrorKind::kFormat, source + ": expected " + std::to_string(3 * n) +
                                        " tensors, found " + std::to_string(count));
  for (uint32_t k = 0; k < count; ++k) {
    const std::string name = r.Bytes(r.U32());
    const uint32_t rank = r.U32();
    std::vector<uint32_t> dims(rank);
    for (auto& d : dims) d = r.U32();
    Eigen::MatrixXd* dst = nullptr;
    const size_t i = k % n;
    const std::string& base = ckpt.params.names[i];
    if (k < n && name == base) dst = &ckpt.params.tensors[i];
    if (k >= n && k < 2 * n && name == "adam.m." + base) dst = &ckpt.adam.m[i];
    if (k >= 2 * n && name == "adam.v." + base) dst = &ckpt.adam.v[i];
    if (!dst) throw Error(ErrorKind::kFormat, source + ": unexpected tensor \"" + name + "\"");
    if (rank != 2 || dims[0] != dst->rows() || dims[1] != dst->cols())
      throw Error(ErrorKind::kFormat, source + ": tensor \"" + name + "\" has the wrong shape");
    for (Eigen::Index row = 0; row < dst->rows(); ++row)
      for (Eigen::Index col = 0; col < dst->cols(); ++col) (*dst)(row, col) = r.F32();
  }
  if (!r.AtEnd()) throw Error(ErrorKind::kFormat, source + ": trailing bytes");
  return ckpt;
}

void WriteCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  WriteFileBytes(path, EncodeCheckpoint(ckpt));
}

Checkpoint ReadCheckpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorKind::kIo, "checkpoint not found: " + path.string());
  return DecodeCheckpoint(ReadFileBytes(path), path.string());
}

}  // namespace umvc
