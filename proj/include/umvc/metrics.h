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


// Objective evaluation: phoneme error rates from the oracle recognizer,
// speaker-probe embeddings and the conversion-vs-resynthesis gap.

#ifndef UMVC_METRICS_H_
#define UMVC_METRICS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "umvc/data.h"

namespace umvc {

struct EditCounts {
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;

  int total() const { return substitutions + insertions + deletions; }
  bool operator==(const EditCounts&) const = default;
};

// Levenshtein alignment of hyp against ref. Among minimal alignments the
// backtrace prefers substitution (or match), then insertion, then deletion.
EditCounts EditDistance(const std::vector<int>& ref, const std::vector<int>& hyp);

struct ErrorRateReport {
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  int reference_length = 0;
  double rate = 0.0;
};

ErrorRateReport ErrorRate(const std::vector<int>& ref, const std::vector<int>& hyp);

struct SpeakerEmbedding {
  Eigen::VectorXd vector;
  std::string source;
};

// Cosine similarity; throws ZeroNorm or DimensionMismatch.
double Secs(const SpeakerEmbedding& a, const SpeakerEmbedding& b);

struct ProbeConfig {
  int max_iters = 1500;
  double learning_rate = 0.5;
  double l2 = 1e-3;
  double target_accuracy = 0.95;
  uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const ProbeConfig& c);
void from_json(const nlohmann::json& j, ProbeConfig& c);

struct ProbeSample {
  const Eigen::MatrixXd* mel = nullptr;  // T x n_mels
  int speaker = 0;
};

// Multinomial logistic regression on standardized [mean; std] time pooling
// of the mel frames.
class SpeakerProbe {
 public:
  // Pooled statistics of a T x n_mels matrix.
  static Eigen::VectorXd PoolFeatures(const Eigen::MatrixXd& mel);

  Eigen::VectorXd Logits(const Eigen::MatrixXd& mel) const;
  int Classify(const Eigen::MatrixXd& mel) const;  // returns a speaker id
  // Pre-softmax logits, centered across classes.
  SpeakerEmbedding Embed(const Eigen::MatrixXd& mel) const;
  SpeakerEmbedding MeanEmbedding(const std::vector<const Eigen::MatrixXd*>& mels) const;
  double Accuracy(const std::vector<ProbeSample>& samples) const;

  int num_classes() const { return static_cast<int>(weights.rows()); }
  std::string Identifier() const;

  std::vector<int> class_speakers;  // class index -> speaker id
  Eigen::VectorXd feature_mean, feature_scale;
  Eigen::MatrixXd weights;  // classes x features
  Eigen::VectorXd bias;
  double train_accuracy = 0.0;
  int iterations = 0;
};

// Full-batch gradient descent for max_iters iterations; throws ProbeUnderfit
// when the final training accuracy is below target_accuracy.
SpeakerProbe TrainSpeakerProbe(const std::vector<ProbeSample>& samples, const ProbeConfig& config);

// Probe samples: every speaker, utterances with an even index within the
// speaker. Odd-indexed utterances are held out.
std::vector<ProbeSample> ProbeTrainSamples(const Corpus& corpus);
std::vector<ProbeSample> ProbeHeldOutSamples(const Corpus& corpus);

nlohmann::json ProbeToJson(const SpeakerProbe& probe);
SpeakerProbe ProbeFromJson(const nlohmann::json& j);
void WriteProbe(const std::filesystem::path& path, const SpeakerProbe& probe);
SpeakerProbe ReadProbe(const std::filesystem::path& path);

struct EvalPair {
  const SyntheticUtterance* source = nullptr;
  const SyntheticUtterance* reference = nullptr;
};

// Source uniform over split utterances, reference from a different speaker
// of the same split.
std::vector<EvalPair> MakeEvalPairs(const Corpus& corpus, Split split, int count, uint64_t seed);

struct EvalOptions {
  int secs_refs = 5;
  SpeakerNorm recognizer_norm = SpeakerNorm::kOn;
  int threads = 1;
};

struct PairResult {
  std::string source_id, reference_id;
  int source_speaker = 0, target_speaker = 0;
  ErrorRateReport conversion, resynthesis;
  double per_conversion = 0.0, per_resynthesis = 0.0, delta_per = 0.0;
  double secs_conversion = 0.0;  // converted vs target speaker
  double secs_source = 0.0;      // converted vs source speaker
};

struct EvalReport {
  std::vector<PairResult> pairs;
  // Corpus level: pooled edits over pooled reference length.
  double per_conversion = 0.0, per_resynthesis = 0.0, delta_per = 0.0;
  // Mean of per-pair rates.
  double per_conversion_utt = 0.0, per_resynthesis_utt = 0.0, delta_per_utt = 0.0;
  double secs_conversion = 0.0, secs_source = 0.0;
  nlohmann::json config;
  uint64_t seed = 0;
};

// Given (source, reference) returns the converted T x n_mels frames.
using Converter = std::function<Eigen::MatrixXd(const SyntheticUtterance& source,
                                                const SyntheticUtterance& reference)>;

// Converts every pair twice (to the reference and to the source itself) and
// scores both against the source phonemes. SECS targets are mean embeddings
// over secs_refs ground-truth utterances of a speaker, excluding the
// utterances used as model input.
EvalReport EvaluateConversions(const Corpus& corpus, const std::vector<EvalPair>& pairs,
                               const Converter& convert, const SpeakerProbe& probe,
                               const EvalOptions& options);

nlohmann::json EvalReportToJson(const EvalReport& report);
// Table with columns metric,conversion,resynthesis,delta,secs.
std::string EvalReportSummaryCsv(const EvalReport& report);
std::string EvalReportPairsCsv(const EvalReport& report);

}  // namespace umvc

#endif  // UMVC_METRICS_H_
