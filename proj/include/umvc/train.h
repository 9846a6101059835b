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

#ifndef UMVC_TRAIN_H_
#define UMVC_TRAIN_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "umvc/masking.h"
#include "umvc/model.h"
#include "umvc/units.h"

namespace umvc {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 16;
  int steps = 1000;
  int segment_len = 128;
  // Transform applied to the speaker-encoder input of the main branch.
  MaskRule speaker_mask = MaskRule::kNone;
  double speaker_mask_ratio = 0.0;
  // Random-time ratio of the siamese branch (both encoders).
  double siamese_mask_ratio = 0.1;
  uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int threads = 1;

  void Validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct AdamState {
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  int64_t step = 0;

  static AdamState ZerosLike(const ModelParams& params);
};

// Bias-corrected Adam; increments state.step.
void AdamStep(ModelParams& params, const Gradients& grads, AdamState& state, double lr,
              double beta1, double beta2, double epsilon);

struct TrainingItem {
  // T x n_mels, time-major as stored.
  Eigen::MatrixXd mel;
  // Required only for MaskRule::kUnitClasses.
  UnitSequence units;
};

// Masks and crop drawn for one item at one step.
struct ItemPlan {
  int crop_start = 0;
  int crop_length = 0;
  MaskPlan speaker;
  MaskPlan siamese;
};

struct LossBreakdown {
  double loss = 0.0;  // l1(y_hat, y)
  double siam = 0.0;  // l1(y_hat_siam, y)
  double cons = 0.0;  // l1(y_hat, y_hat_siam)
  double total = 0.0;
};

// Draws the crop and both masks for `item` from a stream keyed by
// (seed, step, item_id), so plans do not depend on evaluation order.
ItemPlan DrawItemPlan(const TrainingItem& item, const TrainConfig& config, int64_t step,
                      uint64_t item_id);

// Loss of one item under fixed plans; fills grads when non-null.
LossBreakdown ItemLossAndGrad(const ModelParams& params, const TrainingItem& item,
                              const ItemPlan& plan, int segment_len, Gradients* grads);

// Batch mean of per-item losses and gradients; items reduced in order.
LossBreakdown BatchLossAndGrad(const ModelParams& params, const std::vector<const TrainingItem*>& batch,
                               const std::vector<ItemPlan>& plans, int segment_len,
                               Gradients* grads, int threads = 1);

// Ids of the items of batch `step`: a per-epoch permutation keyed by
// (seed, epoch), consumed batch_size at a time.
std::vector<int> BatchIndices(int dataset_size, const TrainConfig& config, int64_t step);

struct StepResult {
  LossBreakdown loss;
  std::vector<int> items;
};

// One optimization step at adam.step. Parameters and moments are kept at
// float precision so checkpoints restore them exactly.
StepResult TrainingStep(const std::vector<TrainingItem>& dataset, ModelParams& params,
                        AdamState& adam, const TrainConfig& config);

// Converts with no masking: the reference is only zero-padded to
// segment_len when shorter. Inputs/outputs are time-major T x n_mels.
Eigen::MatrixXd Convert(const ModelParams& params, const Eigen::MatrixXd& source,
                        const Eigen::MatrixXd& reference, int segment_len);

struct Checkpoint {
  ModelParams params;
  AdamState adam;
  TrainConfig train;
  nlohmann::json extra;  // free-form metadata echoed into the header blob
};

// "UMCK" | version u32 | json length u32 | json bytes | tensor count u32 |
// per tensor: name length u32, name, rank u32, dims u32[rank], row-major f32.
inline constexpr uint32_t kCheckpointFormatVersion = 1;
std::string EncodeCheckpoint(const Checkpoint& ckpt);
Checkpoint DecodeCheckpoint(std::string bytes, const std::string& source);
void WriteCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint ReadCheckpoint(const std::filesystem::path& path);

}  // namespace umvc

#endif  // UMVC_TRAIN_H_
