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


#include "umvc/metrics.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "umvc/error.h"
#include "umvc/io.h"
#include "umvc/rng.h"

namespace umvc {

EditCounts EditDistance(const std::vector<int>& ref, const std::vector<int>& hyp) {
  const size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1));
  for (size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1] ? 1 : 0), d[i][j - 1] + 1, d[i - 1][j] + 1});

  EditCounts c;
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const int sub = ref[i - 1] != hyp[j - 1] ? 1 : 0;
      if (d[i - 1][j - 1] + sub == d[i][j]) {
        c.substitutions += sub;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && d[i][j - 1] + 1 == d[i][j]) {
      ++c.insertions;
      --j;
    } else {
      ++c.deletions;
      --i;
    }
  }
  return c;
}

ErrorRateReport ErrorRate(const std::vector<int>& ref, const std::vector<int>& hyp) {
  if (ref.empty()) throw Error(ErrorKind::kEmptyReference, "reference sequence is empty");
  const EditCounts c = EditDistance(ref, hyp);
  ErrorRateReport r;
  r.substitutions = c.substitutions;
  r.insertions = c.insertions;
  r.deletions = c.deletions;
  r.reference_length = static_cast<int>(ref.size());
  r.rate = static_cast<double>(c.total()) / static_cast<double>(ref.size());
  return r;
}

double Secs(const SpeakerEmbedding& a, const SpeakerEmbedding& b) {
  if (a.vector.size() != b.vector.size())
    throw Error(ErrorKind::kDimensionMismatch, "embedding dimensions differ");
  const double na = a.vector.norm(), nb = b.vector.norm();
  if (na == 0.0 || nb == 0.0 || !std::isfinite(na) || !std::isfinite(nb))
    throw Error(ErrorKind::kZeroNorm, "embedding has zero or non-finite norm");
  return std::clamp(a.vector.dot(b.vector) / (na * nb), -1.0, 1.0);
}

void to_json(nlohmann::json& j, const ProbeConfig& c) {
  j = {{"max_iters", c.max_iters},
       {"learning_rate", c.learning_rate},
       {"l2", c.l2},
       {"target_accuracy", c.target_accuracy},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ProbeConfig& c) {
  ProbeConfig d;
  c.max_iters = j.value("max_iters", d.max_iters);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.l2 = j.value("l2", d.l2);
  c.target_accuracy = j.value("target_accuracy", d.target_accuracy);
  c.seed = j.value("seed", d.seed);
}

Eigen::VectorXd SpeakerProbe::PoolFeatures(const Eigen::MatrixXd& mel) {
  if (mel.rows() < 1) throw Error(ErrorKind::kShapeError, "cannot pool an empty mel");
  const Eigen::Index B = mel.cols();
  const Eigen::RowVectorXd mean = mel.colwise().mean();
  const Eigen::RowVectorXd var = (mel.rowwise() - mean).array().square().colwise().mean();
  Eigen::VectorXd f(2 * B);
  f.head(B) = mean.transpose();
  f.tail(B) = var.array().sqrt().transpose();
  return f;
}

Eigen::VectorXd SpeakerProbe::Logits(const Eigen::MatrixXd& mel) const {
  const Eigen::VectorXd f = PoolFeatures(mel);
  if (f.size() != feature_mean.size())
    throw Error(ErrorKind::kDimensionMismatch, "mel width does not match the probe");
  const Eigen::VectorXd x = ((f - feature_mean).array() / feature_scale.array()).matrix();
  return weights * x + bias;
}

int SpeakerProbe::Classify(const Eigen::MatrixXd& mel) const {
  Eigen::Index best;
  Logits(mel).maxCoeff(&best);
  return class_speakers[best];
}

SpeakerEmbedding SpeakerProbe::Embed(const Eigen::MatrixXd& mel) const {
  Eigen::VectorXd z = Logits(mel);
  z.array() -= z.mean();
  return {std::move(z), Identifier()};
}

SpeakerEmbedding SpeakerProbe::MeanEmbedding(const std::vector<const Eigen::MatrixXd*>& mels) const {
  if (mels.empty()) throw Error(ErrorKind::kShapeError, "no utterances to embed");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(num_classes());
  for (const auto* m : mels) sum += Embed(*m).vector;
  return {sum / static_cast<double>(mels.size()), Identifier()};
}

double SpeakerProbe::Accuracy(const std::vector<ProbeSample>& samples) const {
  if (samples.empty()) return 0.0;
  int hits = 0;
  for (const auto& s : samples) hits += Classify(*s.mel) == s.speaker ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

std::string SpeakerProbe::Identifier() const {
  std::ostringstream os;
  os << "logreg-probe/" << num_classes() << "x" << weights.cols();
  return os.str();
}

SpeakerProbe TrainSpeakerProbe(const std::vector<ProbeSample>& samples, const ProbeConfig& config) {
  if (samples.empty()) throw Error(ErrorKind::kShapeError, "no probe training samples");
  SpeakerProbe probe;
  std::map<int, int> class_of;
  for (const auto& s : samples) class_of.emplace(s.speaker, 0);
  if (class_of.size() < 2) throw Error(ErrorKind::kShapeError, "probe needs at least two speakers");
  for (auto& [spk, cls] : class_of) {
    cls = static_cast<int>(probe.class_speakers.size());
    probe.class_speakers.push_back(spk);
  }

  const int N = static_cast<int>(samples.size());
  const int C = static_cast<int>(class_of.size());
  Eigen::MatrixXd X(N, SpeakerProbe::PoolFeatures(*samples.front().mel).size());
  for (int n = 0; n < N; ++n) {
    const Eigen::VectorXd f = SpeakerProbe::PoolFeatures(*samples[n].mel);
    if (f.size() != X.cols()) throw Error(ErrorKind::kDimensionMismatch, "probe samples differ in mel width");
    X.row(n) = f.transpose();
  }
  probe.feature_mean = X.colwise().mean().transpose();
  const Eigen::VectorXd sd =
      (X.rowwise() - probe.feature_mean.transpose()).array().square().colwise().mean().sqrt().transpose();
  probe.feature_scale = sd.unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });
  X = ((X.rowwise() - probe.feature_mean.transpose()).array().rowwise() /
       probe.feature_scale.transpose().array())
          .matrix();

  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(N, C);
  for (int n = 0; n < N; ++n) Y(n, class_of[samples[n].speaker]) = 1.0;

  probe.weights = Eigen::MatrixXd::Zero(C, X.cols());
  probe.bias = Eigen::VectorXd::Zero(C);
  for (int it = 0; it < config.max_iters; ++it) {
    Eigen::MatrixXd Z = (X * probe.weights.transpose()).rowwise() + probe.bias.transpose();
    Z = Z.colwise() - Z.rowwise().maxCoeff();
    Eigen::MatrixXd P = Z.array().exp();
    P = P.array().colwise() / P.rowwise().sum().array();
    const Eigen::MatrixXd G = (P - Y) / static_cast<double>(N);
    probe.weights -= config.learning_rate * (G.transpose() * X + config.l2 * probe.weights);
    probe.bias -= config.learning_rate * G.colwise().sum().transpose();
    probe.iterations = it + 1;
  }
  probe.train_accuracy = probe.Accuracy(samples);
  if (probe.train_accuracy < config.target_accuracy) {
    std::ostringstream os;
    os << "speaker probe reached " << probe.train_accuracy << " train accuracy, target "
       << config.target_accuracy;
    throw Error(ErrorKind::kProbeUnderfit, os.str());
  }
  return probe;
}

namespace {

std::vector<ProbeSample> ParitySamples(const Corpus& corpus, int parity) {
  std::vector<ProbeSample> out;
  std::map<int, int> seen;
  for (const auto& u : corpus.utterances) {
    const int idx = seen[u.speaker_id]++;
    if (idx % 2 == parity) out.push_back({&u.mel.frames, u.speaker_id});
  }
  return out;
}

nlohmann::json VecJson(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd JsonVec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::vector<ProbeSample> ProbeTrainSamples(const Corpus& corpus) { return ParitySamples(corpus, 0); }
std::vector<ProbeSample> ProbeHeldOutSamples(const Corpus& corpus) { return ParitySamples(corpus, 1); }

nlohmann::json ProbeToJson(const SpeakerProbe& probe) {
  nlohmann::json j;
  j["class_speakers"] = probe.class_speakers;
  j["feature_mean"] = VecJson(probe.feature_mean);
  j["feature_scale"] = VecJson(probe.feature_scale);
  j["bias"] = VecJson(probe.bias);
  for (Eigen::Index r = 0; r < probe.weights.rows(); ++r)
    j["weights"].push_back(VecJson(probe.weights.row(r).transpose()));
  j["train_accuracy"] = probe.train_accuracy;
  j["iterations"] = probe.iterations;
  return j;
}

SpeakerProbe ProbeFromJson(const nlohmann::json& j) {
  SpeakerProbe p;
  try {
    p.class_speakers = j.at("class_speakers").get<std::vector<int>>();
    p.feature_mean = JsonVec(j.at("feature_mean"));
    p.feature_scale = JsonVec(j.at("feature_scale"));
    p.bias = JsonVec(j.at("bias"));
    const auto& rows = j.at("weights");
    p.weights.resize(static_cast<Eigen::Index>(rows.size()), p.feature_mean.size());
    for (size_t r = 0; r < rows.size(); ++r) {
      const Eigen::VectorXd row = JsonVec(rows[r]);
      if (row.size() != p.weights.cols()) throw Error(ErrorKind::kFormat, "probe weight row has wrong width");
      p.weights.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    p.train_accuracy = j.value("train_accuracy", 0.0);
    p.iterations = j.value("iterations", 0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("probe: ") + e.what());
  }
  if (static_cast<Eigen::Index>(p.class_speakers.size()) != p.weights.rows() || p.bias.size() != p.weights.rows() ||
      p.feature_scale.size() != p.feature_mean.size())
    throw Error(ErrorKind::kFormat, "probe: inconsistent shapes");
  return p;
}

void WriteProbe(const std::filesystem::path& path, const SpeakerProbe& probe) {
  WriteFileBytes(path, ProbeToJson(probe).dump() + "\n");
}

SpeakerProbe ReadProbe(const std::filesystem::path& path) {
  try {
    return ProbeFromJson(nlohmann::json::parse(ReadFileBytes(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
}

std::vector<EvalPair> MakeEvalPairs(const Corpus& corpus, Split split, int count, uint64_t seed) {
  const auto pool = corpus.InSplit(split);
  std::map<int, std::vector<const SyntheticUtterance*>> by_speaker;
  for (const auto* u : pool) by_speaker[u->speaker_id].push_back(u);
  if (by_speaker.size() < 2)
    throw Error(ErrorKind::kShapeError, "evaluation split needs at least two speakers");
  std::vector<int> speakers;
  for (const auto& [spk, utts] : by_speaker) speakers.push_back(spk);

  Rng rng = MakeRng(seed, {0x70616972});
  std::vector<EvalPair> out;
  for (int i = 0; i < count; ++i) {
    const SyntheticUtterance* src = pool[UniformIndex(rng, pool.size())];
    int target;
    do {
      target = speakers[UniformIndex(rng, speakers.size())];
    } while (target == src->speaker_id);
    const auto& cands = by_speaker[target];
    out.push_back({src, cands[UniformIndex(rng, cands.size())]});
  }
  return out;
}

namespace {

std::vector<const Eigen::MatrixXd*> SpeakerRefs(const Corpus& corpus, int speaker, int count,
                                                const SyntheticUtterance* exclude_a,
                                                const SyntheticUtterance* exclude_b) {
  std::vector<const Eigen::MatrixXd*> out;
  for (const auto& u : corpus.utterances) {
    if (static_cast<int>(out.size()) == count) break;
    if (u.speaker_id != speaker || &u == exclude_a || &u == exclude_b) continue;
    out.push_back(&u.mel.frames);
  }
  return out;
}

}  // namespace

EvalReport EvaluateConversions(const Corpus& corpus, const std::vector<EvalPair>& pairs,
                               const Converter& convert, const SpeakerProbe& probe,
                               const EvalOptions& options) {
  EvalReport report;
  report.pairs.resize(pairs.size());
  auto run_pair = [&](size_t i) {
    const auto& pair = pairs[i];
    PairResult& r = report.pairs[i];
    r.source_id = pair.source->id;
    r.reference_id = pair.reference->id;
    r.source_speaker = pair.source->speaker_id;
    r.target_speaker = pair.reference->speaker_id;
    const Eigen::MatrixXd converted = convert(*pair.source, *pair.reference);
    const Eigen::MatrixXd resynth = convert(*pair.source, *pair.source);
    r.conversion = ErrorRate(pair.source->phonemes, OracleRecognize(converted, corpus.templates, options.recognizer_norm));
    r.resynthesis = ErrorRate(pair.source->phonemes, OracleRecognize(resynth, corpus.templates, options.recognizer_norm));
    r.per_conversion = r.conversion.rate;
    r.per_resynthesis = r.resynthesis.rate;
    r.delta_per = r.per_conversion - r.per_resynthesis;
    const SpeakerEmbedding emb = probe.Embed(converted);
    r.secs_conversion = Secs(
        emb, probe.MeanEmbedding(SpeakerRefs(corpus, r.target_speaker, options.secs_refs, pair.reference, pair.source)));
    r.secs_source = Secs(
        emb, probe.MeanEmbedding(SpeakerRefs(corpus, r.source_speaker, options.secs_refs, pair.source, pair.reference)));
  };

  const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(pairs.size())));
  if (threads == 1) {
    for (size_t i = 0; i < pairs.size(); ++i) run_pair(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (size_t i; (i = next++) < pairs.size();) run_pair(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  long conv_edits = 0, resyn_edits = 0, ref_len = 0;
  double sum_conv = 0, sum_resyn = 0, sum_secs = 0, sum_src = 0;
  for (const auto& r : report.pairs) {
    conv_edits += r.conversion.substitutions + r.conversion.insertions + r.conversion.deletions;
    resyn_edits += r.resynthesis.substitutions + r.resynthesis.insertions + r.resynthesis.deletions;
    ref_len += r.conversion.reference_length;
    sum_conv += r.per_conversion;
    sum_resyn += r.per_resynthesis;
    sum_secs += r.secs_conversion;
    sum_src += r.secs_source;
  }
  const double n = static_cast<double>(std::max<size_t>(1, report.pairs.size()));
  if (ref_len > 0) {
    report.per_conversion = static_cast<double>(conv_edits) / static_cast<double>(ref_len);
    report.per_resynthesis = static_cast<double>(resyn_edits) / static_cast<double>(ref_len);
  }
  report.delta_per = report.per_conversion - report.per_resynthesis;
  report.per_conversion_utt = sum_conv / n;
  report.per_resynthesis_utt = sum_resyn / n;
  report.delta_per_utt = report.per_conversion_utt - report.per_resynthesis_utt;
  report.secs_conversion = sum_secs / n;
  report.secs_source = sum_src / n;
  return report;
}

namespace {

nlohmann::json RateJson(const ErrorRateReport& r) {
  return {{"substitutions", r.substitutions},
          {"insertions", r.insertions},
          {"deletions", r.deletions},
          {"reference_length", r.reference_length},
          {"rate", r.rate}};
}

std::string Num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

nlohmann::json EvalReportToJson(const EvalReport& report) {
  nlohmann::json j;
  j["seed"] = report.seed;
  j["config"] = report.config;
  j["num_pairs"] = report.pairs.size();
  j["aggregate"] = {
      {"per_conversion", report.per_conversion},
      {"per_resynthesis", report.per_resynthesis},
      {"delta_per", report.delta_per},
      {"per_conversion_utterance_mean", report.per_conversion_utt},
      {"per_resynthesis_utterance_mean", report.per_resynthesis_utt},
      {"delta_per_utterance_mean", report.delta_per_utt},
      {"secs_conversion", report.secs_conversion},
      {"secs_source", report.secs_source},
  };
  j["pairs"] = nlohmann::json::array();
  for (const auto& r : report.pairs)
    j["pairs"].push_back({{"source", r.source_id},
                          {"reference", r.reference_id},
                          {"source_speaker", r.source_speaker},
                          {"target_speaker", r.target_speaker},
                          {"per_conversion", r.per_conversion},
                          {"per_resynthesis", r.per_resynthesis},
                          {"delta_per", r.delta_per},
                          {"secs_conversion", r.secs_conversion},
                          {"secs_source", r.secs_source},
                          {"conversion_edits", RateJson(r.conversion)},
                          {"resynthesis_edits", RateJson(r.resynthesis)}});
  return j;
}

std::string EvalReportSummaryCsv(const EvalReport& report) {
  std::ostringstream os;
  os << "metric,conversion,resynthesis,delta,secs\n";
  os << "per_corpus," << Num(report.per_conversion) << "," << Num(report.per_resynthesis) << ","
     << Num(report.delta_per) << "," << Num(report.secs_conversion) << "\n";
  os << "per_utterance_mean," << Num(report.per_conversion_utt) << "," << Num(report.per_resynthesis_utt)
     << "," << Num(report.delta_per_utt) << "," << Num(report.secs_conversion) << "\n";
  return os.str();
}

std::string EvalReportPairsCsv(const EvalReport& report) {
  std::ostringstream os;
  os << "source,reference,source_speaker,target_speaker,per_conversion,per_resynthesis,delta_per,"
        "secs_conversion,secs_source\n";
  for (const auto& r : report.pairs)
    os << r.source_id << "," << r.reference_id << "," << r.source_speaker << "," << r.target_speaker << ","
       << Num(r.per_conversion) << "," << Num(r.per_resynthesis) << "," << Num(r.delta_per) << ","
       << Num(r.secs_conversion) << "," << Num(r.secs_source) << "\n";
  return os.str();
}

}  // namespace umvc
