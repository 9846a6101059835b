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


#include <cmath>
#include <set>

#include "doctest.h"

#include "gradient_check.h"
#include "test_support.h"
#include "umvc/data.h"
#include "umvc/experiment.h"
#include "umvc/model.h"
#include "umvc/train.h"

using namespace umvc;
using namespace umvc::testing;

namespace {

constexpr double kStep = 1e-6;
constexpr double kRtol = 1e-4;
constexpr double kAtol = 1e-7;

// sum(w .* out) as a scalar probe of a stage output.
double Dot(const Eigen::MatrixXd& a, const Eigen::MatrixXd& w) { return (a.array() * w.array()).sum(); }

void RequireAllPass(const GradientCheckSummary& s) {
  INFO("worst " << s.worst << " rel " << s.max_relative);
  CHECK(s.passed == s.checked);
}

ModelParams ScalarParams(double value) {
  ModelParams p;
  p.tensors = {Eigen::MatrixXd::Constant(1, 1, value)};
  p.names = {"theta"};
  return p;
}

AdamState ScalarAdam() {
  AdamState s;
  s.m = {Eigen::MatrixXd::Zero(1, 1)};
  s.v = {Eigen::MatrixXd::Zero(1, 1)};
  return s;
}

std::vector<TrainingItem> OverfitItems() {
  CorpusConfig c;
  c.n_mels = 16;
  c.n_phonemes = 4;
  c.separation = 2.0;
  c.n_speakers = 5;
  c.utterances_per_speaker = 2;
  c.min_phonemes = 4;
  c.max_phonemes = 6;
  c.seed = 4;
  const Corpus corpus = GenerateCorpus(c);
  std::vector<TrainingItem> items;
  for (const auto& u : corpus.utterances) items.push_back({u.mel.frames, {}});
  return items;
}

}  // namespace

TEST_CASE("parameter enumeration covers every scalar once") {
  const ModelParams p = InitParams(MicroModelConfig(), 1);
  size_t total = 0;
  for (const auto& t : p.tensors) total += static_cast<size_t>(t.size());
  CHECK(p.NumScalars() == total);
  CHECK(std::set<std::string>(p.names.begin(), p.names.end()).size() == p.names.size());
  std::set<std::pair<std::string, int>> seen;
  for (size_t k = 0; k < p.NumScalars(); ++k) seen.insert(p.ScalarName(k));
  CHECK(seen.size() == total);
  for (const auto& t : p.tensors) {
    REQUIRE(t.allFinite());
    for (Eigen::Index i = 0; i < t.size(); ++i)
      REQUIRE(static_cast<double>(static_cast<float>(t.data()[i])) == t.data()[i]);
  }
  CHECK(InitParams(MicroModelConfig(), 1).Fingerprint() == p.Fingerprint());
  CHECK(InitParams(MicroModelConfig(), 2).Fingerprint() != p.Fingerprint());
}

TEST_CASE("model config validation") {
  ModelConfig c = MicroModelConfig();
  c.bottleneck_channels = c.channels + 1;
  CHECK(KindOf([&] { c.Validate(); }) == ErrorKind::kConfigInvalid);
  c = MicroModelConfig();
  c.kernel = 2;
  CHECK(KindOf([&] { c.Validate(); }) == ErrorKind::kConfigInvalid);
  nlohmann::json j = MicroModelConfig();
  CHECK(j.get<ModelConfig>() == MicroModelConfig());
}

TEST_CASE("content_encode examples") {
  const ModelParams p = InitParams(MicroModelConfig(), 3);
  const FeatureMap zero = FeatureMap::Zero(6, 10);
  ContentCache cache;
  const FeatureMap out = ContentEncode(p, zero, &cache);
  REQUIRE(out.rows() == 8);
  REQUIRE(out.cols() == 10);
  // Zero input: every stage sees bias-only constant frames, so weights are irrelevant.
  ModelParams q = p;
  q.tensors[p.layout.content_w[0]].setRandom();
  CHECK(ContentEncode(q, zero) == out);

  Rng rng(4);
  ContentEncode(p, RandomMatrix(6, 12, rng), &cache);
  CHECK(cache.norm.back().normalized.rowwise().mean().cwiseAbs().maxCoeff() < 1e-9);

  CHECK(KindOf([&] { ContentEncode(p, FeatureMap::Zero(5, 4)); }) == ErrorKind::kShapeError);
}

TEST_CASE("speaker_encode examples") {
  ModelConfig c = MicroModelConfig();
  c.kernel = 1;
  const ModelParams p = InitParams(c, 5);
  Rng rng(6);
  FeatureMap mel = RandomMatrix(6, 10, rng);
  mel.rightCols(4).setZero();
  SpeakerCache a, b;
  const FeatureMap out = SpeakerEncode(p, mel, &a);
  CHECK(SpeakerEncode(p, mel) == out);
  // Swapping two zero frames leaves the kernel-1 conv stack unchanged.
  FeatureMap swapped = mel;
  swapped.col(6).swap(swapped.col(8));
  SpeakerEncode(p, swapped, &b);
  CHECK(a.hidden == b.hidden);
  for (int i = 0; i < a.attention.rows(); ++i) CHECK(std::abs(a.attention.row(i).sum() - 1.0) < 1e-12);
}

TEST_CASE("decode examples") {
  ModelConfig c = MicroModelConfig();
  c.kernel = 1;
  const ModelParams p = InitParams(c, 7);
  const FeatureMap out = Decode(p, FeatureMap::Zero(8, 9));
  REQUIRE(out.rows() == 6);
  REQUIRE(out.cols() == 9);
  for (int t = 1; t < 9; ++t) CHECK(out.col(t) == out.col(0));
  CHECK(KindOf([&] { Decode(p, FeatureMap::Zero(7, 9)); }) == ErrorKind::kShapeError);
}

TEST_CASE("duan_stylize with constant speaker features collapses to the constant") {
  const ModelParams p = InitParams(MicroModelConfig(), 8);
  Rng rng(9);
  const FeatureMap x = RandomMatrix(8, 11, rng);
  const double c = 1.75;
  const FeatureMap out = DuanStylize(p, x, FeatureMap::Constant(8, 7, c));
  const double s = std::sqrt(kNormEpsilon);
  const FeatureMap after_time = (InstanceNorm(x).normalized.array() * s + c).matrix();
  const FeatureMap want = (InstanceNorm(after_time).normalized.array() * s + c).matrix();
  CHECK((out - want).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((out.array() - c).abs().maxCoeff() < 1e-2);
}

TEST_CASE("duan_stylize with uniform attention and standard speaker stats is near identity") {
  ModelParams p = InitParams(MicroModelConfig(), 10);
  const ParamLayout& L = p.layout;
  for (int i : {L.time_q, L.time_k, L.chan_query_embed, L.chan_key_embed, L.chan_query_proj, L.chan_key_proj})
    p.tensors[i].setZero();
  Rng rng(11);
  const FeatureMap x = InstanceNorm(RandomMatrix(8, 12, rng)).normalized;
  // Every speaker channel is the same zero-mean unit-variance +-1 pattern.
  FeatureMap f(8, 10);
  for (int t = 0; t < 10; ++t) f.col(t).setConstant(t % 2 ? 1.0 : -1.0);
  const FeatureMap out = DuanStylize(p, x, f);
  CHECK((out - x).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(KindOf([&] { DuanStylize(p, x, FeatureMap::Zero(7, 10)); }) == ErrorKind::kDimensionMismatch);
}

TEST_CASE("duan gradients match finite differences") {
  ModelParams p = InitParams(MicroModelConfig(), 12);
  Rng rng(13);
  const FeatureMap content = RandomMatrix(8, 9, rng), speaker = RandomMatrix(8, 7, rng);
  const Eigen::MatrixXd w = RandomMatrix(8, 9, rng);
  DuanCache cache;
  DuanStylize(p, content, speaker, &cache);
  Gradients g = p.ZeroGradients();
  const auto [d_content, d_speaker] = DuanBackward(p, speaker, cache, w, g);
  RequireAllPass(CheckParameterGradients(p, g, [&](const ModelParams& q) { return Dot(DuanStylize(q, content, speaker), w); },
                                         kStep, kRtol, kAtol));
  CHECK(MaxRelativeError(d_content, NumericGradient([&](const Eigen::MatrixXd& x) { return Dot(DuanStylize(p, x, speaker), w); }, content)) < kRtol);
  CHECK(MaxRelativeError(d_speaker, NumericGradient([&](const Eigen::MatrixXd& x) { return Dot(DuanStylize(p, content, x), w); }, speaker)) < kRtol);
}

TEST_CASE("encoder and decoder gradients match finite differences") {
  ModelParams p = InitParams(MicroModelConfig(), 14);
  Rng rng(15);
  const FeatureMap mel = RandomMatrix(6, 10, rng);
  const Eigen::MatrixXd w8 = RandomMatrix(8, 10, rng), w6 = RandomMatrix(6, 10, rng);

  SUBCASE("speaker") {
    SpeakerCache cache;
    SpeakerEncode(p, mel, &cache);
    Gradients g = p.ZeroGradients();
    SpeakerBackward(p, cache, w8, g);
    RequireAllPass(CheckParameterGradients(p, g, [&](const ModelParams& q) { return Dot(SpeakerEncode(q, mel), w8); },
                                           kStep, kRtol, kAtol));
  }
  SUBCASE("content") {
    ContentCache cache;
    ContentEncode(p, mel, &cache);
    Gradients g = p.ZeroGradients();
    ContentBackward(p, cache, w8, g);
    RequireAllPass(CheckParameterGradients(p, g, [&](const ModelParams& q) { return Dot(ContentEncode(q, mel), w8); },
                                           kStep, kRtol, kAtol));
  }
  SUBCASE("decoder") {
    const FeatureMap styled = RandomMatrix(8, 10, rng);
    DecoderCache cache;
    Decode(p, styled, &cache);
    Gradients g = p.ZeroGradients();
    const FeatureMap d_in = DecodeBackward(p, cache, w6, g);
    RequireAllPass(CheckParameterGradients(p, g, [&](const ModelParams& q) { return Dot(Decode(q, styled), w6); },
                                           kStep, kRtol, kAtol));
    CHECK(MaxRelativeError(d_in, NumericGradient([&](const Eigen::MatrixXd& x) { return Dot(Decode(p, x), w6); }, styled)) < kRtol);
  }
}

TEST_CASE("full training loss gradient matches finite differences") {
  ModelParams p = InitParams(MicroModelConfig(), 3);
  const TrainConfig tc = MicroTrainConfig();
  const TrainingItem a = MicroItem(5), b = MicroItem(6);
  const std::vector<const TrainingItem*> batch = {&a, &b};
  const std::vector<ItemPlan> plans = {DrawItemPlan(a, tc, 0, 0), DrawItemPlan(b, tc, 0, 1)};
  REQUIRE(!plans[0].speaker.masked_frames.empty());
  REQUIRE(!plans[0].siamese.masked_frames.empty());
  Gradients g;
  const LossBreakdown l = BatchLossAndGrad(p, batch, plans, tc.segment_len, &g);
  CHECK(l.cons > 0.0);
  const GradientCheckSummary s = CheckParameterGradients(
      p, g, [&](const ModelParams& q) { return BatchLossAndGrad(q, batch, plans, tc.segment_len, nullptr).total; },
      kStep, kRtol, kAtol);
  INFO("worst " << s.worst << " rel " << s.max_relative);
  CHECK(s.PassFraction() >= 0.99);
  CHECK(s.max_relative <= 1e-3);
}

TEST_CASE("batch of duplicated items equals the single item") {
  const ModelParams p = InitParams(MicroModelConfig(), 3);
  const TrainConfig tc = MicroTrainConfig();
  const TrainingItem a = MicroItem(5);
  const ItemPlan plan = DrawItemPlan(a, tc, 0, 0);
  Gradients g1 = p.ZeroGradients(), g2;
  const LossBreakdown one = ItemLossAndGrad(p, a, plan, tc.segment_len, &g1);
  const LossBreakdown two = BatchLossAndGrad(p, {&a, &a}, {plan, plan}, tc.segment_len, &g2);
  CHECK(two.total == doctest::Approx(one.total).epsilon(1e-14));
  for (size_t i = 0; i < g1.size(); ++i) CHECK((g1[i] - g2[i]).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("composite objective arithmetic and identical branches") {
  const ModelParams p = InitParams(MicroModelConfig(), 3);
  TrainConfig tc = MicroTrainConfig();
  const TrainingItem a = MicroItem(5);
  const LossBreakdown l = ItemLossAndGrad(p, a, DrawItemPlan(a, tc, 0, 0), tc.segment_len, nullptr);
  CHECK(l.total == (l.loss + l.siam) / 2 + l.cons);

  tc.speaker_mask_ratio = 0.0;
  tc.siamese_mask_ratio = 0.0;
  for (MaskRule rule : {MaskRule::kNone, MaskRule::kUnitClasses, MaskRule::kRandomTime}) {
    tc.speaker_mask = rule;
    const LossBreakdown z = ItemLossAndGrad(p, a, DrawItemPlan(a, tc, 0, 0), tc.segment_len, nullptr);
    CHECK(z.cons == 0.0);
    CHECK(z.loss == z.siam);
  }
}

TEST_CASE("adam_step hand oracle") {
  ModelParams p = ScalarParams(0.5);
  AdamState s = ScalarAdam();
  AdamStep(p, {Eigen::MatrixXd::Constant(1, 1, 1.0)}, s, 0.1, 0.9, 0.999, 1e-8);
  // m = 0.1, v = 0.001; bias-corrected both equal 1.
  const double m_hat = 0.1 / (1 - 0.9), v_hat = 0.001 / (1 - 0.999);
  CHECK(p.tensors[0](0, 0) == doctest::Approx(0.5 - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8)).epsilon(1e-14));
  CHECK(s.m[0](0, 0) == doctest::Approx(0.1));
  CHECK(s.v[0](0, 0) == doctest::Approx(0.001));
  CHECK(s.step == 1);

  const double before = p.tensors[0](0, 0);
  AdamStep(p, {Eigen::MatrixXd::Constant(1, 1, 1.0)}, s, 0.1, 0.9, 0.999, 1e-8);
  CHECK(p.tensors[0](0, 0) < before);

  // A zero gradient still moves theta by the remaining momentum but decays both moments.
  ModelParams z = ScalarParams(0.5);
  AdamState zs = ScalarAdam();
  AdamStep(z, {Eigen::MatrixXd::Zero(1, 1)}, zs, 0.1, 0.9, 0.999, 1e-8);
  CHECK(z.tensors[0](0, 0) == 0.5);
  zs.m[0](0, 0) = 1.0;
  zs.v[0](0, 0) = 1.0;
  AdamStep(z, {Eigen::MatrixXd::Zero(1, 1)}, zs, 0.1, 0.9, 0.999, 1e-8);
  CHECK(zs.m[0](0, 0) == doctest::Approx(0.9));
  CHECK(zs.v[0](0, 0) == doctest::Approx(0.999));
}

TEST_CASE("overfit smoke: loss halves within 200 steps on 10 utterances") {
  const std::vector<TrainingItem> items = OverfitItems();
  REQUIRE(items.size() == 10);
  ModelConfig mc;
  mc.n_mels = 16;
  mc.channels = 16;
  mc.attention_dim = 8;
  TrainConfig tc;
  tc.learning_rate = 3e-3;
  tc.batch_size = 10;
  tc.steps = 200;
  tc.segment_len = 64;
  tc.seed = 1;
  const TrainOutcome out = TrainModel(items, mc, tc);
  REQUIRE(out.trace.size() == 200);
  INFO("initial " << out.trace.front().total << " final " << out.trace.back().total);
  CHECK(out.trace.back().total < 0.5 * out.trace.front().total);
}

TEST_CASE("training is deterministic and resumes bit-exactly") {
  std::vector<TrainingItem> items;
  for (uint64_t s = 0; s < 5; ++s) items.push_back(MicroItem(100 + s));
  TrainConfig tc = MicroTrainConfig();
  tc.batch_size = 2;
  tc.steps = 6;
  tc.learning_rate = 1e-2;
  tc.seed = 9;
  const TrainOutcome a = TrainModel(items, MicroModelConfig(), tc);
  const TrainOutcome b = TrainModel(items, MicroModelConfig(), tc);
  REQUIRE(a.trace.size() == 6);
  for (size_t i = 0; i < 6; ++i) CHECK(a.trace[i].total == b.trace[i].total);

  TrainConfig threaded = tc;
  threaded.threads = 2;
  const TrainOutcome c = TrainModel(items, MicroModelConfig(), threaded);
  for (size_t i = 0; i < 6; ++i) CHECK(a.trace[i].total == c.trace[i].total);

  TrainConfig half = tc;
  half.steps = 3;
  const TrainOutcome first = TrainModel(items, MicroModelConfig(), half);
  Checkpoint ckpt{first.params, first.adam, half, {}};
  const Checkpoint restored = DecodeCheckpoint(EncodeCheckpoint(ckpt), "memory");
  const TrainOutcome rest = TrainModel(items, MicroModelConfig(), tc, &restored);
  REQUIRE(rest.trace.size() == 3);
  for (size_t i = 0; i < 3; ++i) CHECK(rest.trace[i].total == a.trace[3 + i].total);
  CHECK(rest.params.Fingerprint() == a.params.Fingerprint());
}

TEST_CASE("checkpoint round trip and corruption") {
  ModelParams p = InitParams(MicroModelConfig(), 21);
  AdamState adam = AdamState::ZerosLike(p);
  adam.step = 17;
  adam.m[0].setConstant(0.25);
  Checkpoint ckpt{p, adam, MicroTrainConfig(), {{"note", "x"}}};
  const std::string bytes = EncodeCheckpoint(ckpt);
  const Checkpoint back = DecodeCheckpoint(bytes, "memory");
  CHECK(back.params.config == p.config);
  CHECK(back.params.Fingerprint() == p.Fingerprint());
  CHECK(back.adam.step == 17);
  CHECK(back.adam.m[0] == adam.m[0]);
  CHECK(back.train == ckpt.train);
  CHECK(EncodeCheckpoint(back) == bytes);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK(KindOf([&] { DecodeCheckpoint(bad, "bad"); }) == ErrorKind::kFormat);
  CHECK(KindOf([&] { DecodeCheckpoint(bytes.substr(0, bytes.size() - 3), "short"); }) == ErrorKind::kFormat);
  CHECK(KindOf([&] { DecodeCheckpoint(bytes + "z", "long"); }) == ErrorKind::kFormat);

  const auto dir = ScratchDir("ckpt");
  WriteCheckpoint(dir / "m.umck", ckpt);
  CHECK(ReadCheckpoint(dir / "m.umck").params.Fingerprint() == p.Fingerprint());
  CHECK(KindOf([&] { ReadCheckpoint(dir / "missing.umck"); }) == ErrorKind::kIo);
}

TEST_CASE("convert is the unmasked forward pass") {
  const ModelParams p = InitParams(MicroModelConfig(), 22);
  Rng rng(23);
  const Eigen::MatrixXd src = RandomMatrix(12, 6, rng), ref = RandomMatrix(9, 6, rng);
  const Eigen::MatrixXd out = Convert(p, src, ref, 16);
  REQUIRE(out.rows() == 12);
  REQUIRE(out.cols() == 6);
  CHECK(Convert(p, src, ref, 16) == out);
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(16, 6);
  padded.topRows(9) = ref;
  CHECK(out == Predict(p, src.transpose(), padded.transpose()).transpose());
  const Eigen::MatrixXd resyn = Convert(p, src, src, 12);
  CHECK(resyn == Predict(p, src.transpose(), src.transpose()).transpose());
}

TEST_CASE("non-finite loss aborts the step") {
  std::vector<TrainingItem> items = {MicroItem(1)};
  items[0].mel(3, 2) = std::nan("");
  ModelParams p = InitParams(MicroModelConfig(), 1);
  AdamState adam = AdamState::ZerosLike(p);
  TrainConfig tc = MicroTrainConfig();
  tc.batch_size = 1;
  CHECK(KindOf([&] { TrainingStep(items, p, adam, tc); }) == ErrorKind::kNonFiniteLoss);
  CHECK(adam.step == 0);
}
