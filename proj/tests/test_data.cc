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


#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"

#include "test_support.h"
#include "umvc/data.h"
#include "umvc/units.h"

using namespace umvc;
using umvc::testing::KindOf;
using umvc::testing::ScratchDir;

namespace {

CorpusConfig SmallConfig() {
  CorpusConfig c;
  c.n_mels = 20;
  c.n_speakers = 5;
  c.utterances_per_speaker = 4;
  c.seed = 3;
  return c;
}

// Random phoneme and duration sequence within the template ranges.
std::pair<std::vector<int>, std::vector<int>> RandomScript(Rng& rng, int P, int len) {
  std::vector<int> phonemes, durations;
  while (static_cast<int>(phonemes.size()) < len) {
    const int p = static_cast<int>(UniformIndex(rng, P));
    if (!phonemes.empty() && phonemes.back() == p) continue;
    phonemes.push_back(p);
    durations.push_back(4 + static_cast<int>(UniformIndex(rng, 7)));
  }
  return {phonemes, durations};
}

}  // namespace

TEST_CASE("make_templates examples") {
  const auto t = MakeTemplates(8, 80, 1.0, 5);
  REQUIRE(t.size() == 8);
  for (size_t i = 0; i < t.size(); ++i)
    for (size_t j = i + 1; j < t.size(); ++j) CHECK((t[i].profile - t[j].profile).norm() >= 1.0);
  const auto again = MakeTemplates(8, 80, 1.0, 5);
  for (size_t i = 0; i < t.size(); ++i) CHECK(again[i].profile == t[i].profile);
  CHECK(KindOf([] { MakeTemplates(2, 2, 1e3, 1); }) == ErrorKind::kSeparationInfeasible);
}

TEST_CASE("render_utterance examples") {
  const auto templates = MakeTemplates(4, 12, 1.0, 2);
  const SyntheticSpeaker id = SyntheticSpeaker::Identity(0, 12);
  const std::vector<int> phonemes = {2, 0, 3}, durations = {4, 6, 5};
  const SyntheticUtterance u = RenderUtterance(phonemes, durations, templates, id, 0.0, 1);
  REQUIRE(u.mel.frames.rows() == 15);
  for (int t = 0; t < 15; ++t)
    CHECK((u.mel.frames.row(t).transpose() - templates[u.frame_labels[t]].profile).cwiseAbs().maxCoeff() < 1e-6);

  // Runs of frame_labels reproduce the durations.
  std::vector<int> runs;
  for (size_t t = 0; t < u.frame_labels.size(); ++t) {
    if (t == 0 || u.frame_labels[t] != u.frame_labels[t - 1]) runs.push_back(0);
    ++runs.back();
  }
  CHECK(runs == durations);

  SyntheticSpeaker other = id;
  other.tilt = 0.05;
  other.shift = -0.7;
  other.gain = Eigen::VectorXd::LinSpaced(12, 0.8, 1.2);
  const SyntheticUtterance v = RenderUtterance(phonemes, durations, templates, other, 0.0, 1);
  for (int t = 0; t < 15; ++t)
    for (int b = 0; b < 12; ++b) {
      const double want = u.mel.frames(t, b) * other.gain[b] + other.tilt * b + other.shift;
      CHECK(std::abs(v.mel.frames(t, b) - want) < 1e-5);
    }

  CHECK(KindOf([&] { RenderUtterance({0}, {3}, templates, id, 0.0, 1); }) == ErrorKind::kShapeError);
  CHECK(KindOf([&] { RenderUtterance({9}, {5}, templates, id, 0.0, 1); }) == ErrorKind::kShapeError);
}

TEST_CASE("noise is seeded and has the configured scale") {
  const auto templates = MakeTemplates(4, 40, 1.0, 2);
  const SyntheticSpeaker id = SyntheticSpeaker::Identity(0, 40);
  std::vector<int> phonemes(12), durations(12, 10);
  for (int i = 0; i < 12; ++i) phonemes[i] = i % 4;
  const auto clean = RenderUtterance(phonemes, durations, templates, id, 0.0, 1);
  const auto a = RenderUtterance(phonemes, durations, templates, id, 0.1, 7);
  CHECK(RenderUtterance(phonemes, durations, templates, id, 0.1, 7).mel.frames == a.mel.frames);
  CHECK(RenderUtterance(phonemes, durations, templates, id, 0.1, 8).mel.frames != a.mel.frames);
  const Eigen::MatrixXd noise = a.mel.frames - clean.mel.frames;
  const double sd = std::sqrt(noise.array().square().mean());
  CHECK(std::abs(noise.mean()) < 0.01);
  CHECK(std::abs(sd - 0.1) < 0.005);
}

TEST_CASE("gen_corpus default split and contents") {
  const Corpus c = GenerateCorpus(CorpusConfig{});
  CHECK(c.utterances.size() == 400);
  std::map<Split, int> counts;
  for (Split s : c.speaker_split) ++counts[s];
  CHECK(counts[Split::kTrain] == 6);
  CHECK(counts[Split::kVal] == 2);
  CHECK(counts[Split::kTest] == 2);

  std::map<Split, std::set<int>> speakers;
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest})
    for (const auto* u : c.InSplit(s)) speakers[s].insert(u->speaker_id);
  for (int spk = 0; spk < 10; ++spk) {
    int found = 0;
    for (auto& [split, ids] : speakers) found += ids.contains(spk) ? 1 : 0;
    CHECK(found == 1);
  }

  std::set<std::string> ids;
  for (const auto& u : c.utterances) {
    ids.insert(u.id);
    REQUIRE(static_cast<int>(u.frame_labels.size()) == u.mel.num_frames());
    REQUIRE(static_cast<int>(u.phonemes.size()) >= 6);
    REQUIRE(static_cast<int>(u.phonemes.size()) <= 12);
    for (size_t i = 0; i < u.phonemes.size(); ++i) {
      REQUIRE(u.phonemes[i] >= 0);
      REQUIRE(u.phonemes[i] < 8);
      REQUIRE(u.durations[i] >= 4);
      REQUIRE(u.durations[i] <= 10);
    }
  }
  CHECK(ids.size() == 400);

  for (const auto& s : c.speakers) CHECK(s.gain.minCoeff() > 0.0);

  const Corpus again = GenerateCorpus(CorpusConfig{});
  for (size_t i = 0; i < c.utterances.size(); ++i) REQUIRE(again.utterances[i].mel.frames == c.utterances[i].mel.frames);
}

TEST_CASE("gen_corpus validation") {
  CorpusConfig c = SmallConfig();
  c.n_speakers = 4;
  CHECK(KindOf([&] { GenerateCorpus(c); }) == ErrorKind::kConfigInvalid);
  c = SmallConfig();
  c.max_phonemes = 2;
  CHECK(KindOf([&] { GenerateCorpus(c); }) == ErrorKind::kConfigInvalid);
}

TEST_CASE("oracle_recognize examples") {
  const auto templates = MakeTemplates(8, 80, 4.0, 1);
  const SyntheticSpeaker id = SyntheticSpeaker::Identity(0, 80);
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto [phonemes, durations] = RandomScript(rng, 8, 3 + static_cast<int>(UniformIndex(rng, 10)));
    const auto u = RenderUtterance(phonemes, durations, templates, id, 0.0, trial);
    REQUIRE(OracleRecognize(u.mel.frames, templates, SpeakerNorm::kOff) == phonemes);
    REQUIRE(OracleRecognize(u.mel.frames, templates, SpeakerNorm::kOn) == phonemes);
  }
  const Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(9, 80, 0.3);
  CHECK(OracleRecognize(constant, templates, SpeakerNorm::kOff).size() == 1);
}

TEST_CASE("oracle recognition survives noise 0.1") {
  CorpusConfig c;
  c.noise_std = 0.1;
  c.utterances_per_speaker = 10;
  const Corpus identity = GenerateCorpusWithSpeakers(c, [&] {
    std::vector<SyntheticSpeaker> s;
    for (int i = 0; i < c.n_speakers; ++i) s.push_back(SyntheticSpeaker::Identity(i, c.n_mels));
    return s;
  }());
  const Corpus shifted = GenerateCorpus(c);
  for (const auto& [corpus, norm] : {std::pair{&identity, SpeakerNorm::kOff}, std::pair{&shifted, SpeakerNorm::kOn}}) {
    int exact = 0;
    for (const auto& u : corpus->utterances)
      exact += OracleRecognize(u.mel.frames, corpus->templates, norm) == u.phonemes ? 1 : 0;
    INFO("exact " << exact << " of " << corpus->utterances.size());
    CHECK(exact >= 0.95 * static_cast<double>(corpus->utterances.size()));
  }
}

TEST_CASE("unit_purity examples") {
  CHECK(UnitPurity({0, 0, 1, 1}, {3, 3, 4, 4}, 2) == 1.0);
  CHECK(UnitPurity({0, 0, 0, 0}, {3, 3, 3, 4}, 1) == 0.75);
  CHECK(KindOf([] { UnitPurity({0, 1}, {0}, 2); }) == ErrorKind::kShapeError);
}

TEST_CASE("corpus write and read round trip") {
  const Corpus c = GenerateCorpus(SmallConfig());
  const auto dir = ScratchDir("corpus");
  WriteCorpus(dir, c);
  const Corpus back = ReadCorpus(dir);
  CHECK(back.config == c.config);
  REQUIRE(back.utterances.size() == c.utterances.size());
  CHECK(back.speaker_split == c.speaker_split);
  for (size_t i = 0; i < c.utterances.size(); ++i) {
    CHECK(back.utterances[i].id == c.utterances[i].id);
    CHECK(back.utterances[i].phonemes == c.utterances[i].phonemes);
    CHECK(back.utterances[i].frame_labels == c.utterances[i].frame_labels);
    CHECK(back.utterances[i].mel.frames == c.utterances[i].mel.frames);
  }
  for (size_t i = 0; i < c.templates.size(); ++i) CHECK(back.templates[i].profile == c.templates[i].profile);

  std::ifstream manifest(dir / "manifest.jsonl");
  std::string line;
  int records = 0;
  while (std::getline(manifest, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("id"));
    CHECK(j.contains("speaker"));
    CHECK(j.contains("split"));
    CHECK(j.contains("phonemes"));
    CHECK(std::filesystem::exists(dir / j["mel_path"].get<std::string>()));
    ++records;
  }
  CHECK(records == static_cast<int>(c.utterances.size()));
  CHECK(KindOf([] { ReadCorpus("/nonexistent/umvc_corpus"); }) == ErrorKind::kIo);
}
