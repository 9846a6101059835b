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


// Experiment configuration and the train / evaluate pipeline shared by the
// command-line tool and the acceptance checks.

#ifndef UMVC_EXPERIMENT_H_
#define UMVC_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "umvc/data.h"
#include "umvc/dsp.h"
#include "umvc/masking.h"
#include "umvc/metrics.h"
#include "umvc/model.h"
#include "umvc/train.h"
#include "umvc/units.h"

namespace umvc {

struct MaskVariant {
  MaskRule rule = MaskRule::kNone;
  double ratio = 0.0;

  // "none", "unit:0.2", "random_time:0.1"
  std::string Label() const;
  static MaskVariant Parse(const std::string& text);
  bool operator==(const MaskVariant&) const = default;
};

struct UnitsConfig {
  int K = 16;
  int max_iters = 100;
  FeatureNorm feature_norm = FeatureNorm::kUtteranceMvn;
  bool operator==(const UnitsConfig&) const = default;
};

struct EvalConfig {
  int pairs = 64;
  int secs_refs = 5;
  SpeakerNorm recognizer_norm = SpeakerNorm::kOn;
  bool operator==(const EvalConfig&) const = default;
};

struct ExperimentConfig {
  uint64_t seed = 1;  // kmeans, init, batches, masks, probe and pair sampling
  int threads = 1;
  std::filesystem::path out_dir = "runs/default";
  CorpusConfig corpus;  // carries its own seed so variants share one corpus
  MelConfig mel;
  UnitsConfig units;
  MaskVariant mask{MaskRule::kUnitClasses, 0.2};
  int segment_len = 128;
  ModelConfig model;
  // Optimizer and siamese settings; mask rule, seed, segment length and
  // threads are filled in by TrainSettings().
  TrainConfig train;
  ProbeConfig probe;
  EvalConfig eval;
  std::vector<MaskVariant> compare;

  ExperimentConfig();
  void Validate() const;
  TrainConfig TrainSettings() const;
  TrainConfig TrainSettings(const MaskVariant& variant) const;
  bool operator==(const ExperimentConfig& other) const;
};

// Reduced-width setting that trains a variant in a few minutes on one core:
// 32 channels, a 2-channel content bottleneck, learning rate 2e-3, 1000
// steps and 200 evaluation pairs. Everything else keeps its default.
ExperimentConfig DeskPreset();

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

nlohmann::json MelConfigToJson(const MelConfig& c);
MelConfig MelConfigFromJson(const nlohmann::json& j);

// Reads a JSON config file (missing keys keep their defaults).
ExperimentConfig LoadConfig(const std::filesystem::path& path);
// Applies UMVC_SEED and UMVC_THREADS when set.
void ApplyEnvironment(ExperimentConfig& config);

// SHA-1 of the canonical JSON serialization.
std::string ConfigHash(const ExperimentConfig& config);

// k-means over the unit features of all train-split frames.
KmeansResult TrainCodebook(const Corpus& corpus, const ExperimentConfig& config);

// Train-split items; units are attached when a codebook is given.
std::vector<TrainingItem> MakeTrainingItems(const Corpus& corpus, const Codebook* codebook,
                                            FeatureNorm norm);

// Mean phonetic leakage of the variant's speaker-input plans over `items`,
// drawn as in training step 0.
double MeanLeakage(const std::vector<TrainingItem>& items, const TrainConfig& train);

struct TrainOutcome {
  ModelParams params;
  AdamState adam;
  std::vector<LossBreakdown> trace;  // one entry per step taken in this call
  uint64_t init_fingerprint = 0;
};

using StepCallback = std::function<void(int64_t step, const ModelParams&, const AdamState&,
                                        const LossBreakdown&)>;

// Fresh init from (model, seed), or continuation of `resume`, up to
// train.steps total steps.
TrainOutcome TrainModel(const std::vector<TrainingItem>& items, const ModelConfig& model,
                        const TrainConfig& train, const Checkpoint* resume = nullptr,
                        const StepCallback& on_step = nullptr);

SpeakerProbe TrainProbe(const Corpus& corpus, const ExperimentConfig& config);

EvalReport EvaluateModel(const ModelParams& params, const Corpus& corpus, const SpeakerProbe& probe,
                         const ExperimentConfig& config);

struct VariantResult {
  MaskVariant variant;
  EvalReport report;
  double mean_leakage = 0.0;
  uint64_t init_fingerprint = 0;
  double final_loss = 0.0;
  ModelParams params;
};

// Trains one variant from a fresh init and evaluates it.
VariantResult RunVariant(const Corpus& corpus, const Codebook& codebook, const SpeakerProbe& probe,
                         const ExperimentConfig& config, const MaskVariant& variant);

// One row per variant; relative improvement of delta PER against the first
// row, (delta_0 - delta_i) / |delta_0|.
std::string CompareTable(const std::vector<VariantResult>& results);
nlohmann::json CompareJson(const std::vector<VariantResult>& results);

}  // namespace umvc

#endif  // UMVC_EXPERIMENT_H_
