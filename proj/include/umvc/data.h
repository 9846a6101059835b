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

// Synthetic log-mel corpus with exact phoneme and speaker ground truth.
//
// A speaker maps a phoneme profile p to  p * gain + tilt * bin + shift  in the
// log-mel domain, so speaker identity is frame-local and independent of the
// phoneme being spoken.

#ifndef UMVC_DATA_H_
#define UMVC_DATA_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "umvc/dsp.h"

namespace umvc {

struct PhonemeTemplate {
  int id = 0;
  Eigen::VectorXd profile;  // n_mels
  int min_duration = 4;
  int max_duration = 10;
};

struct SyntheticSpeaker {
  int id = 0;
  double tilt = 0.0;
  double shift = 0.0;
  Eigen::VectorXd gain;  // n_mels, positive

  static SyntheticSpeaker Identity(int id, int n_mels);
};

struct SyntheticUtterance {
  std::string id;
  int speaker_id = 0;
  std::vector<int> phonemes;
  std::vector<int> durations;
  std::vector<int> frame_labels;
  MelSpectrogram mel;
};

enum class Split { kTrain, kVal, kTest };
std::string SplitName(Split s);
Split ParseSplit(const std::string& s);

struct CorpusConfig {
  int n_phonemes = 8;
  int n_mels = 80;
  double separation = 4.0;
  int n_speakers = 10;
  int utterances_per_speaker = 40;
  int min_phonemes = 6;
  int max_phonemes = 12;
  int min_duration = 4;
  int max_duration = 10;
  double noise_std = 0.05;
  double tilt_range = 0.02;
  double shift_range = 1.0;
  double gain_depth = 0.2;
  double speaker_margin = 0.3;
  uint64_t seed = 1;

  void Validate() const;
  bool operator==(const CorpusConfig&) const = default;
};

void to_json(nlohmann::json& j, const CorpusConfig& c);
void from_json(const nlohmann::json& j, CorpusConfig& c);

struct Corpus {
  CorpusConfig config;
  std::vector<PhonemeTemplate> templates;
  std::vector<SyntheticSpeaker> speakers;
  std::vector<Split> speaker_split;  // indexed by speaker id
  std::vector<SyntheticUtterance> utterances;

  std::vector<const SyntheticUtterance*> InSplit(Split s) const;
  std::vector<const SyntheticUtterance*> OfSpeaker(int speaker_id) const;
};

// Smooth bounded profiles, rejection-sampled to pairwise L2 >= separation.
std::vector<PhonemeTemplate> MakeTemplates(int count, int n_mels, double separation, uint64_t seed,
                                           int min_duration = 4, int max_duration = 10);

std::vector<SyntheticSpeaker> MakeSpeakers(const CorpusConfig& config);

// Frames for phoneme i repeat template phonemes[i] for durations[i] frames;
// mel values are rounded to float precision.
SyntheticUtterance RenderUtterance(const std::vector<int>& phonemes,
                                   const std::vector<int>& durations,
                                   const std::vector<PhonemeTemplate>& templates,
                                   const SyntheticSpeaker& speaker, double noise_std,
                                   uint64_t seed);

// Splits speakers 60/20/20 into train/val/test and renders
// utterances_per_speaker utterances each. Utterance seeds derive from
// (seed, speaker, index).
Corpus GenerateCorpus(const CorpusConfig& config);

// Same as GenerateCorpus but with caller-provided speakers.
Corpus GenerateCorpusWithSpeakers(const CorpusConfig& config,
                                  std::vector<SyntheticSpeaker> speakers);

enum class SpeakerNorm { kOff, kOn };

// Nearest template per frame by L2 (lowest id on ties), then consecutive
// duplicates collapsed. kOn removes a per-frame least-squares line across
// mel bins from frames and templates first, which cancels tilt and shift.
std::vector<int> OracleRecognize(const Eigen::MatrixXd& mel, const std::vector<PhonemeTemplate>& templates,
                                 SpeakerNorm norm);

// Fraction of frames whose unit's majority phoneme matches their own.
double UnitPurity(const std::vector<int>& units, const std::vector<int>& phonemes, int K);

// Layout: <dir>/corpus.json (config, templates, speakers, splits),
// <dir>/manifest.jsonl (one {id, speaker, split, phonemes, durations, mel_path}
// record per utterance) and <dir>/mels/<id>.umvc.
void WriteCorpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus ReadCorpus(const std::filesystem::path& dir);

}  // namespace umvc

#endif  // UMVC_DATA_H_
