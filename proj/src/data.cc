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

#include "umvc/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "umvc/error.h"
#include "umvc/io.h"
#include "umvc/rng.h"

namespace umvc {

namespace {

constexpr double kProfileBound = 3.0;
constexpr int kMaxTemplateTries = 2000;
constexpr int kMaxSpeakerTries = 2000;

// Sum of a few Gaussian bumps across mel bins.
Eigen::VectorXd SmoothProfile(int n_mels, int bumps, double amplitude, Rng& rng) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n_mels);
  const double max_width = std::max(2.0, n_mels / 6.0);
  for (int k = 0; k < bumps; ++k) {
    const double center = UniformRange(rng, 0.0, n_mels - 1.0);
    const double width = UniformRange(rng, 1.5, max_width);
    const double amp = UniformRange(rng, -amplitude, amplitude);
    for (int b = 0; b < n_mels; ++b) {
      const double z = (b - center) / width;
      v[b] += amp * std::exp(-0.5 * z * z);
    }
  }
  return v;
}

Eigen::VectorXd Detrend(const Eigen::VectorXd& v) {
  const int n = static_cast<int>(v.size());
  if (n < 2) return v - Eigen::VectorXd::Constant(n, v.mean());
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, 0.0, n - 1.0);
  const double xm = x.mean(), vm = v.mean();
  const double slope = ((x.array() - xm) * (v.array() - vm)).sum() / (x.array() - xm).square().sum();
  return (v.array() - vm - slope * (x.array() - xm)).matrix();
}

double SpeakerDistance(const SyntheticSpeaker& a, const SyntheticSpeaker& b, int n_mels) {
  return std::max({std::abs(a.shift - b.shift), std::abs(a.tilt - b.tilt) * (n_mels - 1),
                   (a.gain - b.gain).cwiseAbs().maxCoeff()});
}

}  // namespace

SyntheticSpeaker SyntheticSpeaker::Identity(int id, int n_mels) {
  SyntheticSpeaker s;
  s.id = id;
  s.gain = Eigen::VectorXd::Ones(n_mels);
  return s;
}

std::string SplitName(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "unknown";
}

Split ParseSplit(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw Error(ErrorKind::kFormat, "unknown split \"" + s + "\"");
}

void CorpusConfig::Validate() const {
  if (n_phonemes < 2) throw Error(ErrorKind::kConfigInvalid, "need at least 2 phonemes");
  if (n_mels < 1) throw Error(ErrorKind::kConfigInvalid, "n_mels must be positive");
  if (n_speakers < 5) throw Error(ErrorKind::kConfigInvalid, "need at least 5 speakers for a 60/20/20 split");
  if (utterances_per_speaker < 1) throw Error(ErrorKind::kConfigInvalid, "utterances_per_speaker must be positive");
  if (min_phonemes < 1 || max_phonemes < min_phonemes)
    throw Error(ErrorKind::kConfigInvalid, "invalid phoneme count range");
  if (min_duration < 1 || max_duration < min_duration)
    throw Error(ErrorKind::kConfigInvalid, "invalid duration range");
  if (noise_std < 0.0 || separation <= 0.0 || gain_depth < 0.0)
    throw Error(ErrorKind::kConfigInvalid, "noise_std, separation and gain_depth must be non-negative");
}

void to_json(nlohmann::json& j, const CorpusConfig& c) {
  j = {{"n_phonemes", c.n_phonemes},       {"n_mels", c.n_mels},
       {"separation", c.separation},       {"n_speakers", c.n_speakers},
       {"utterances_per_speaker", c.utterances_per_speaker},
       {"min_phonemes", c.min_phonemes},   {"max_phonemes", c.max_phonemes},
       {"min_duration", c.min_duration},   {"max_duration", c.max_duration},
       {"noise_std", c.noise_std},         {"tilt_range", c.tilt_range},
       {"shift_range", c.shift_range},     {"gain_depth", c.gain_depth},
       {"speaker_margin", c.speaker_margin}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, CorpusConfig& c) {
  CorpusConfig d;
  c.n_phonemes = j.value("n_phonemes", d.n_phonemes);
  c.n_mels = j.value("n_mels", d.n_mels);
  c.separation = j.value("separation", d.separation);
  c.n_speakers = j.value("n_speakers", d.n_speakers);
  c.utterances_per_speaker = j.value("utterances_per_speaker", d.utterances_per_speaker);
  c.min_phonemes = j.value("min_phonemes", d.min_phonemes);
  c.max_phonemes = j.value("max_phonemes", d.max_phonemes);
  c.min_duration = j.value("min_duration", d.min_duration);
  c.max_duration = j.value("max_duration", d.max_duration);
  c.noise_std = j.value("noise_std", d.noise_std);
  c.tilt_range = j.value("tilt_range", d.tilt_range);
  c.shift_range = j.value("shift_range", d.shift_range);
  c.gain_depth = j.value("gain_depth", d.gain_depth);
  c.speaker_margin = j.value("speaker_margin", d.speaker_margin);
  c.seed = j.value("seed", d.seed);
}

std::vector<const SyntheticUtterance*> Corpus::InSplit(Split s) const {
  std::vector<const SyntheticUtterance*> out;
  for (const auto& u : utterances)
    if (speaker_split[u.speaker_id] == s) out.push_back(&u);
  return out;
}

std::vector<const SyntheticUtterance*> Corpus::OfSpeaker(int speaker_id) const {
  std::vector<const SyntheticUtterance*> out;
  for (const auto& u : utterances)
    if (u.speaker_id == speaker_id) out.push_back(&u);
  return out;
}

std::vector<PhonemeTemplate> MakeTemplates(int count, int n_mels, double separation, uint64_t seed,
                                           int min_duration, int max_duration) {
  if (count < 2) throw Error(ErrorKind::kConfigInvalid, "need at least 2 templates");
  Rng rng = MakeRng(seed, {0x746d706c});
  std::vector<PhonemeTemplate> out;
  for (int id = 0; id < count; ++id) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxTemplateTries && !placed; ++attempt) {
      Eigen::VectorXd profile =
          SmoothProfile(n_mels, 4, 2.0, rng).cwiseMax(-kProfileBound).cwiseMin(kProfileBound);
      bool ok = true;
      for (const auto& t : out) ok = ok && (t.profile - profile).norm() >= separation;
      if (!ok) continue;
      out.push_back({id, std::move(profile), min_duration, max_duration});
      placed = true;
    }
    if (!placed)
      throw Error(ErrorKind::kSeparationInfeasible,
                  "could not place template " + std::to_string(id) + " at separation " +
                      std::to_string(separation) + " in " + std::to_string(n_mels) + " bins");
  }
  return out;
}

std::vector<SyntheticSpeaker> MakeSpeakers(const CorpusConfig& config) {
  Rng rng = MakeRng(config.seed, {0x73706b72});
  std::vector<SyntheticSpeaker> out;
  for (int id = 0; id < config.n_speakers; ++id) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxSpeakerTries && !placed; ++attempt) {
      SyntheticSpeaker s;
      s.id = id;
      s.tilt = UniformRange(rng, -config.tilt_range, config.tilt_range);
      s.shift = UniformRange(rng, -config.shift_range, config.shift_range);
      const Eigen::VectorXd env = SmoothProfile(config.n_mels, 3, 1.0, rng).cwiseMax(-1.0).cwiseMin(1.0);
      s.gain = (config.gain_depth * env.array()).exp();
      bool ok = true;
      for (const auto& o : out) ok = ok && SpeakerDistance(o, s, config.n_mels) >= config.speaker_margin;
      if (!ok) continue;
      out.push_back(std::move(s));
      placed = true;
    }
    if (!placed)
      throw Error(ErrorKind::kSeparationInfeasible,
                  "could not place speaker " + std::to_string(id) + " at margin " +
                      std::to_string(config.speaker_margin));
  }
  return out;
}

SyntheticUtterance RenderUtterance(const std::vector<int>& phonemes, const std::vector<int>& durations,
                                   const std::vector<PhonemeTemplate>& templates,
                                   const SyntheticSpeaker& speaker, double noise_std, uint64_t seed) {
  if (phonemes.size() != durations.size() || phonemes.empty())
    throw Error(ErrorKind::kShapeError, "phoneme and duration sequences must be nonempty and equal length");
  const int n_mels = static_cast<int>(templates.front().profile.size());
  if (speaker.gain.size() != n_mels)
    throw Error(ErrorKind::kDimensionMismatch, "speaker gain does not match template width");
  SyntheticUtterance u;
  u.speaker_id = speaker.id;
  u.phonemes = phonemes;
  u.durations = durations;
  for (size_t i = 0; i < phonemes.size(); ++i) {
    const int p = phonemes[i];
    if (p < 0 || p >= static_cast<int>(templates.size()))
      throw Error(ErrorKind::kShapeError, "phoneme id " + std::to_string(p) + " out of range");
    if (durations[i] < templates[p].min_duration || durations[i] > templates[p].max_duration)
      throw Error(ErrorKind::kShapeError, "duration outside the template's range");
    u.frame_labels.insert(u.frame_labels.end(), durations[i], p);
  }
  Rng rng = MakeRng(seed, {0x6e6f6973});
  const int T = static_cast<int>(u.frame_labels.size());
  u.mel.config.n_mels = n_mels;
  u.mel.frames.resize(T, n_mels);
  for (int t = 0; t < T; ++t) {
    const Eigen::VectorXd& profile = templates[u.frame_labels[t]].profile;
    for (int b = 0; b < n_mels; ++b) {
      double v = profile[b] * speaker.gain[b] + speaker.tilt * b + speaker.shift;
      if (noise_std > 0.0) v += noise_std * StandardNormal(rng);
      u.mel.frames(t, b) = v;
    }
  }
  RoundToFloat(u.mel.frames);
  return u;
}

Corpus GenerateCorpus(const CorpusConfig& config) {
  config.Validate();
  return GenerateCorpusWithSpeakers(config, MakeSpeakers(config));
}

Corpus GenerateCorpusWithSpeakers(const CorpusConfig& config, std::vector<SyntheticSpeaker> speakers) {
  config.Validate();
  Corpus c;
  c.config = config;
  c.templates = MakeTemplates(config.n_phonemes, config.n_mels, config.separation, config.seed,
                              config.min_duration, config.max_duration);
  c.speakers = std::move(speakers);
  const int n = static_cast<int>(c.speakers.size());

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = MakeRng(config.seed, {0x73706c74});
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[UniformIndex(split_rng, i + 1)]);
  const int n_val = n / 5, n_test = n / 5;
  c.speaker_split.assign(n, Split::kTrain);
  for (int i = 0; i < n_val; ++i) c.speaker_split[order[n - n_test - n_val + i]] = Split::kVal;
  for (int i = 0; i < n_test; ++i) c.speaker_split[order[n - n_test + i]] = Split::kTest;

  for (const auto& spk : c.speakers) {
    for (int u = 0; u < config.utterances_per_speaker; ++u) {
      const uint64_t seed = DeriveSeed(config.seed, {static_cast<uint64_t>(spk.id), static_cast<uint64_t>(u)});
      Rng rng(seed);
      const int len = config.min_phonemes +
                      static_cast<int>(UniformIndex(rng, config.max_phonemes - config.min_phonemes + 1));
      std::vector<int> phonemes, durations;
      for (int i = 0; i < len; ++i) {
        int p;
        // No immediate repeats, so the collapsed frame sequence equals the phoneme sequence.
        do {
          p = static_cast<int>(UniformIndex(rng, config.n_phonemes));
        } while (!phonemes.empty() && p == phonemes.back());
        phonemes.push_back(p);
        durations.push_back(config.min_duration +
                            static_cast<int>(UniformIndex(rng, config.max_duration - config.min_duration + 1)));
      }
      SyntheticUtterance utt = RenderUtterance(phonemes, durations, c.templates, spk, config.noise_std, seed);
      std::ostringstream id;
      id << "spk" << spk.id << "_utt" << u;
      utt.id = id.str();
      c.utterances.push_back(std::move(utt));
    }
  }
  return c;
}

std::vector<int> OracleRecognize(const Eigen::MatrixXd& mel, const std::vector<PhonemeTemplate>& templates,
                                 SpeakerNorm norm) {
  std::vector<Eigen::VectorXd> refs;
  for (const auto& t : templates) refs.push_back(norm == SpeakerNorm::kOn ? Detrend(t.profile) : t.profile);
  std::vector<int> seq;
  for (Eigen::Index t = 0; t < mel.rows(); ++t) {
    Eigen::VectorXd frame = mel.row(t).transpose();
    if (frame.size() != refs.front().size())
      throw Error(ErrorKind::kDimensionMismatch, "mel width does not match templates");
    if (norm == SpeakerNorm::kOn) frame = Detrend(frame);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < refs.size(); ++k) {
      const double d = (refs[k] - frame).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = templates[k].id;
      }
    }
    if (seq.empty() || seq.back() != best) seq.push_back(best);
  }
  return seq;
}

double UnitPurity(const std::vector<int>& units, const std::vector<int>& phonemes, int K) {
  if (units.size() != phonemes.size() || units.empty())
    throw Error(ErrorKind::kShapeError, "unit and phoneme label sequences must match");
  std::vector<std::map<int, int>> counts(K);
  for (size_t i = 0; i < units.size(); ++i) ++counts[units[i]][phonemes[i]];
  long majority = 0;
  for (const auto& m : counts) {
    int best = 0;
    for (const auto& [p, c] : m) best = std::max(best, c);
    majority += best;
  }
  return static_cast<double>(majority) / static_cast<double>(units.size());
}

namespace {

nlohmann::json VecJson(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd JsonVec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void WriteCorpus(const std::filesystem::path& dir, const Corpus& corpus) {
  EnsureDirectory(dir / "mels");
  nlohmann::json meta;
  meta["config"] = corpus.config;
  for (const auto& t : corpus.templates)
    meta["templates"].push_back({{"id", t.id},
                                 {"profile", VecJson(t.profile)},
                                 {"min_duration", t.min_duration},
                                 {"max_duration", t.max_duration}});
  for (const auto& s : corpus.speakers)
    meta["speakers"].push_back({{"id", s.id},
                                {"tilt", s.tilt},
                                {"shift", s.shift},
                                {"gain", VecJson(s.gain)},
                                {"split", SplitName(corpus.speaker_split[s.id])}});
  WriteFileBytes(dir / "corpus.json", meta.dump(1) + "\n");

  std::string manifest;
  for (const auto& u : corpus.utterances) {
    const std::string rel = "mels/" + u.id + ".umvc";
    WriteMel(dir / rel, u.mel);
    const nlohmann::json rec = {{"id", u.id},
                                {"speaker", u.speaker_id},
                                {"split", SplitName(corpus.speaker_split[u.speaker_id])},
                                {"phonemes", u.phonemes},
                                {"durations", u.durations},
                                {"mel_path", rel}};
    manifest += rec.dump() + "\n";
  }
  WriteFileBytes(dir / "manifest.jsonl", manifest);
}

Corpus ReadCorpus(const std::filesystem::path& dir) {
  Corpus c;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ReadFileBytes(dir / "corpus.json"));
    c.config = meta.at("config").get<CorpusConfig>();
    for (const auto& t : meta.at("templates"))
      c.templates.push_back({t.at("id").get<int>(), JsonVec(t.at("profile")),
                             t.at("min_duration").get<int>(), t.at("max_duration").get<int>()});
    for (const auto& s : meta.at("speakers")) {
      SyntheticSpeaker spk;
      spk.id = s.at("id").get<int>();
      spk.tilt = s.at("tilt").get<double>();
      spk.shift = s.at("shift").get<double>();
      spk.gain = JsonVec(s.at("gain"));
      c.speakers.push_back(std::move(spk));
      c.speaker_split.push_back(ParseSplit(s.at("split").get<std::string>()));
    }
    std::istringstream lines(ReadFileBytes(dir / "manifest.jsonl"));
    std::string line;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      const auto rec = nlohmann::json::parse(line);
      SyntheticUtterance u;
      u.id = rec.at("id").get<std::string>();
      u.speaker_id = rec.at("speaker").get<int>();
      u.phonemes = rec.at("phonemes").get<std::vector<int>>();
      u.durations = rec.at("durations").get<std::vector<int>>();
      for (size_t i = 0; i < u.phonemes.size(); ++i)
        u.frame_labels.insert(u.frame_labels.end(), u.durations[i], u.phonemes[i]);
      u.mel = ReadMel(dir / rec.at("mel_path").get<std::string>());
      if (u.mel.num_frames() != static_cast<int>(u.frame_labels.size()))
        throw Error(ErrorKind::kFormat, u.id + ": mel length does not match durations");
      c.utterances.push_back(std::move(u));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, (dir / "corpus.json").string() + ": " + e.what());
  }
  return c;
}

}  // namespace umvc
