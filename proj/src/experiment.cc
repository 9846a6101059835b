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


#include "umvc/experiment.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <set>
#include <sstream>

#include "umvc/error.h"
#include "umvc/io.h"
#include "umvc/rng.h"

namespace umvc {

namespace {

std::string FormatRatio(double r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", r);
  return buf;
}

std::string FeatureNormName(FeatureNorm n) { return n == FeatureNorm::kNone ? "none" : "utterance_mvn"; }

FeatureNorm ParseFeatureNorm(const std::string& s) {
  if (s == "none") return FeatureNorm::kNone;
  if (s == "utterance_mvn") return FeatureNorm::kUtteranceMvn;
  throw Error(ErrorKind::kConfigInvalid, "unknown feature_norm \"" + s + "\"");
}

// Optimizer fields only; the rest of TrainConfig is derived.
nlohmann::json TrainJson(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
          {"steps", t.steps},                 {"siamese_mask_ratio", t.siamese_mask_ratio},
          {"beta1", t.beta1},                 {"beta2", t.beta2},
          {"adam_epsilon", t.adam_epsilon}};
}

TrainConfig TrainFromJson(const nlohmann::json& j) {
  TrainConfig d, t;
  t.learning_rate = j.value("learning_rate", d.learning_rate);
  t.batch_size = j.value("batch_size", d.batch_size);
  t.steps = j.value("steps", d.steps);
  t.siamese_mask_ratio = j.value("siamese_mask_ratio", d.siamese_mask_ratio);
  t.beta1 = j.value("beta1", d.beta1);
  t.beta2 = j.value("beta2", d.beta2);
  t.adam_epsilon = j.value("adam_epsilon", d.adam_epsilon);
  return t;
}

void RejectUnknownKeys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::kConfigInvalid, where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw Error(ErrorKind::kConfigInvalid, "unknown key \"" + key + "\" in " + where);
}

}  // namespace

std::string MaskVariant::Label() const {
  switch (rule) {
    case MaskRule::kNone: return "none";
    case MaskRule::kUnitClasses: return "unit:" + FormatRatio(ratio);
    case MaskRule::kRandomTime: return "random_time:" + FormatRatio(ratio);
  }
  return "none";
}

MaskVariant MaskVariant::Parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  MaskVariant v;
  if (name == "none") {
    if (colon != std::string::npos) throw Error(ErrorKind::kConfigInvalid, "variant none takes no ratio");
    return v;
  }
  if (name == "unit" || name == "unit_classes") {
    v.rule = MaskRule::kUnitClasses;
  } else if (name == "random" || name == "random_time") {
    v.rule = MaskRule::kRandomTime;
  } else {
    throw Error(ErrorKind::kConfigInvalid, "unknown mask variant \"" + text + "\"");
  }
  if (colon == std::string::npos) throw Error(ErrorKind::kConfigInvalid, "variant \"" + text + "\" needs a ratio");
  char* end = nullptr;
  const std::string num = text.substr(colon + 1);
  v.ratio = std::strtod(num.c_str(), &end);
  if (num.empty() || *end != '\0' || !(v.ratio >= 0.0 && v.ratio <= 1.0))
    throw Error(ErrorKind::kConfigInvalid, "invalid ratio in variant \"" + text + "\"");
  return v;
}

ExperimentConfig::ExperimentConfig() {
  compare = {MaskVariant{},
             {MaskRule::kRandomTime, 0.1},
             {MaskRule::kRandomTime, 0.2},
             {MaskRule::kUnitClasses, 0.1},
             {MaskRule::kUnitClasses, 0.2},
             {MaskRule::kUnitClasses, 0.3}};
}

ExperimentConfig DeskPreset() {
  ExperimentConfig c;
  c.model.channels = 32;
  c.model.attention_dim = 16;
  c.model.bottleneck_channels = 2;
  c.train.learning_rate = 2e-3;
  c.train.steps = 1000;
  c.eval.pairs = 200;
  return c;
}

void ExperimentConfig::Validate() const {
  if (threads < 1) throw Error(ErrorKind::kConfigInvalid, "threads must be positive");
  corpus.Validate();
  mel.Validate(16000);
  model.Validate();
  if (mel.n_mels != corpus.n_mels || model.n_mels != corpus.n_mels)
    throw Error(ErrorKind::kConfigInvalid, "corpus, mel and model n_mels must agree");
  if (units.K < 2 || units.max_iters < 1) throw Error(ErrorKind::kConfigInvalid, "units.K >= 2 and max_iters >= 1");
  if (segment_len < 1) throw Error(ErrorKind::kConfigInvalid, "segment_len must be positive");
  if (eval.pairs < 1 || eval.secs_refs < 1)
    throw Error(ErrorKind::kConfigInvalid, "eval.pairs and eval.secs_refs must be positive");
  TrainSettings().Validate();
  for (const auto& v : compare) TrainSettings(v).Validate();
}

TrainConfig ExperimentConfig::TrainSettings() const { return TrainSettings(mask); }

TrainConfig ExperimentConfig::TrainSettings(const MaskVariant& variant) const {
  TrainConfig t = train;
  t.speaker_mask = variant.rule;
  t.speaker_mask_ratio = variant.ratio;
  t.seed = seed;
  t.segment_len = segment_len;
  t.threads = threads;
  return t;
}

bool ExperimentConfig::operator==(const ExperimentConfig& other) const {
  return nlohmann::json(*this) == nlohmann::json(other);
}

nlohmann::json MelConfigToJson(const MelConfig& c) {
  return {{"n_mels", c.n_mels},
          {"window_ms", c.window_ms},
          {"hop_ms", c.hop_ms},
          {"fft_size", c.fft_size},
          {"log_floor", c.log_floor}};
}

MelConfig MelConfigFromJson(const nlohmann::json& j) {
  MelConfig d, c;
  c.n_mels = j.value("n_mels", d.n_mels);
  c.window_ms = j.value("window_ms", d.window_ms);
  c.hop_ms = j.value("hop_ms", d.hop_ms);
  c.fft_size = j.value("fft_size", d.fft_size);
  c.log_floor = j.value("log_floor", d.log_floor);
  return c;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json variants = nlohmann::json::array();
  for (const auto& v : c.compare) variants.push_back(v.Label());
  j = {{"seed", c.seed},
       {"threads", c.threads},
       {"out_dir", c.out_dir.string()},
       {"corpus", c.corpus},
       {"mel", MelConfigToJson(c.mel)},
       {"units",
        {{"K", c.units.K}, {"max_iters", c.units.max_iters}, {"feature_norm", FeatureNormName(c.units.feature_norm)}}},
       {"mask", c.mask.Label()},
       {"segment_len", c.segment_len},
       {"model", c.model},
       {"train", TrainJson(c.train)},
       {"probe",
        {{"max_iters", c.probe.max_iters},
         {"learning_rate", c.probe.learning_rate},
         {"l2", c.probe.l2},
         {"target_accuracy", c.probe.target_accuracy}}},
       {"eval",
        {{"pairs", c.eval.pairs},
         {"secs_refs", c.eval.secs_refs},
         {"recognizer_norm", c.eval.recognizer_norm == SpeakerNorm::kOn ? "on" : "off"}}},
       {"compare", variants}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  RejectUnknownKeys(j,
                    {"seed", "threads", "out_dir", "corpus", "mel", "units", "mask", "segment_len", "model", "train",
                     "probe", "eval", "compare"},
                    "config");
  ExperimentConfig d;
  c.seed = j.value("seed", d.seed);
  c.threads = j.value("threads", d.threads);
  c.out_dir = j.value("out_dir", d.out_dir.string());
  c.corpus = j.value("corpus", nlohmann::json::object()).get<CorpusConfig>();
  c.mel = MelConfigFromJson(j.value("mel", nlohmann::json::object()));
  const auto u = j.value("units", nlohmann::json::object());
  c.units.K = u.value("K", d.units.K);
  c.units.max_iters = u.value("max_iters", d.units.max_iters);
  c.units.feature_norm = ParseFeatureNorm(u.value("feature_norm", FeatureNormName(d.units.feature_norm)));
  c.mask = MaskVariant::Parse(j.value("mask", d.mask.Label()));
  c.segment_len = j.value("segment_len", d.segment_len);
  c.model = j.value("model", nlohmann::json::object()).get<ModelConfig>();
  c.train = TrainFromJson(j.value("train", nlohmann::json::object()));
  const auto p = j.value("probe", nlohmann::json::object());
  c.probe.max_iters = p.value("max_iters", d.probe.max_iters);
  c.probe.learning_rate = p.value("learning_rate", d.probe.learning_rate);
  c.probe.l2 = p.value("l2", d.probe.l2);
  c.probe.target_accuracy = p.value("target_accuracy", d.probe.target_accuracy);
  const auto e = j.value("eval", nlohmann::json::object());
  c.eval.pairs = e.value("pairs", d.eval.pairs);
  c.eval.secs_refs = e.value("secs_refs", d.eval.secs_refs);
  const std::string norm = e.value("recognizer_norm", std::string("on"));
  if (norm != "on" && norm != "off") throw Error(ErrorKind::kConfigInvalid, "eval.recognizer_norm must be on or off");
  c.eval.recognizer_norm = norm == "on" ? SpeakerNorm::kOn : SpeakerNorm::kOff;
  if (j.contains("compare")) {
    c.compare.clear();
    for (const auto& v : j.at("compare")) c.compare.push_back(MaskVariant::Parse(v.get<std::string>()));
  } else {
    c.compare = d.compare;
  }
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::string text;
  try {
    text = ReadFileBytes(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfigInvalid, e.what());
  }
  try {
    return nlohmann::json::parse(text).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfigInvalid, path.string() + ": " + e.what());
  }
}

void ApplyEnvironment(ExperimentConfig& config) {
  auto parse = [](const char* name, const char* value) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value, &end, 10);
    if (*value == '\0' || *end != '\0') throw Error(ErrorKind::kConfigInvalid, std::string(name) + " must be an integer");
    return v;
  };
  if (const char* s = std::getenv("UMVC_SEED")) config.seed = parse("UMVC_SEED", s);
  if (const char* t = std::getenv("UMVC_THREADS")) config.threads = static_cast<int>(parse("UMVC_THREADS", t));
}

std::string ConfigHash(const ExperimentConfig& config) { return GitBlobHash(nlohmann::json(config).dump()); }

KmeansResult TrainCodebook(const Corpus& corpus, const ExperimentConfig& config) {
  const auto train = corpus.InSplit(Split::kTrain);
  std::vector<Eigen::MatrixXd> feats;
  Eigen::Index rows = 0;
  for (const auto* u : train) {
    feats.push_back(UnitFeatures(u->mel, config.units.feature_norm));
    rows += feats.back().rows();
  }
  if (feats.empty()) throw Error(ErrorKind::kTooFewPoints, "train split has no frames");
  Eigen::MatrixXd all(rows, feats.front().cols());
  Eigen::Index r = 0;
  for (const auto& f : feats) {
    all.middleRows(r, f.rows()) = f;
    r += f.rows();
  }
  return FitKmeans(all, config.units.K, config.units.max_iters, DeriveSeed(config.seed, {0x6b6d}));
}

std::vector<TrainingItem> MakeTrainingItems(const Corpus& corpus, const Codebook* codebook, FeatureNorm norm) {
  std::vector<TrainingItem> items;
  for (const auto* u : corpus.InSplit(Split::kTrain)) {
    TrainingItem item;
    item.mel = u->mel.frames;
    if (codebook) item.units = AssignUnits(UnitFeatures(u->mel, norm), *codebook);
    items.push_back(std::move(item));
  }
  return items;
}

double MeanLeakage(const std::vector<TrainingItem>& items, const TrainConfig& train) {
  if (items.empty()) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < items.size(); ++i) {
    const ItemPlan plan = DrawItemPlan(items[i], train, 0, i);
    UnitSequence z = items[i].units;
    const int f = std::max(1, z.rate_factor);
    z.labels.assign(z.labels.begin() + plan.crop_start / f,
                    z.labels.begin() + (plan.crop_start + plan.crop_length) / f);
    sum += PhoneticLeakage(z, plan.speaker);
  }
  return sum / static_cast<double>(items.size());
}

TrainOutcome TrainModel(const std::vector<TrainingItem>& items, const ModelConfig& model, const TrainConfig& train,
                        const Checkpoint* resume, const StepCallback& on_step) {
  train.Validate();
  TrainOutcome out;
  if (resume) {
    if (!(resume->params.config == model))
      throw Error(ErrorKind::kConfigInvalid, "checkpoint model config differs from the requested model");
    out.params = resume->params;
    out.adam = resume->adam;
  } else {
    out.params = InitParams(model, train.seed);
    out.adam = AdamState::ZerosLike(out.params);
  }
  out.init_fingerprint = out.params.Fingerprint();
  while (out.adam.step < train.steps) {
    const StepResult r = TrainingStep(items, out.params, out.adam, train);
    out.trace.push_back(r.loss);
    if (on_step) on_step(out.adam.step, out.params, out.adam, r.loss);
  }
  return out;
}

SpeakerProbe TrainProbe(const Corpus& corpus, const ExperimentConfig& config) {
  ProbeConfig pc = config.probe;
  pc.seed = config.seed;
  return TrainSpeakerProbe(ProbeTrainSamples(corpus), pc);
}

EvalReport EvaluateModel(const ModelParams& params, const Corpus& corpus, const SpeakerProbe& probe,
                         const ExperimentConfig& config) {
  const auto pairs = MakeEvalPairs(corpus, Split::kTest, config.eval.pairs, config.seed);
  const int segment_len = config.segment_len;
  EvalOptions options;
  options.secs_refs = config.eval.secs_refs;
  options.recognizer_norm = config.eval.recognizer_norm;
  options.threads = config.threads;
  EvalReport report = EvaluateConversions(
      corpus, pairs,
      [&](const SyntheticUtterance& src, const SyntheticUtterance& ref) {
        return Convert(params, src.mel.frames, ref.mel.frames, segment_len);
      },
      probe, options);
  report.config = config;
  report.seed = config.seed;
  return report;
}

VariantResult RunVariant(const Corpus& corpus, const Codebook& codebook, const SpeakerProbe& probe,
                         const ExperimentConfig& config, const MaskVariant& variant) {
  const auto items = MakeTrainingItems(corpus, &codebook, config.units.feature_norm);
  const TrainConfig train = config.TrainSettings(variant);
  TrainOutcome outcome = TrainModel(items, config.model, train);
  VariantResult r;
  r.variant = variant;
  r.mean_leakage = MeanLeakage(items, train);
  r.init_fingerprint = outcome.init_fingerprint;
  r.final_loss = outcome.trace.empty() ? 0.0 : outcome.trace.back().total;
  ExperimentConfig echo = config;
  echo.mask = variant;
  r.report = EvaluateModel(outcome.params, corpus, probe, echo);
  r.params = std::move(outcome.params);
  return r;
}

namespace {

double RelativeImprovement(double base, double value) {
  return base == 0.0 ? 0.0 : (base - value) / std::abs(base);
}

}  // namespace

std::string CompareTable(const std::vector<VariantResult>& results) {
  std::ostringstream os;
  os << "variant,per_conversion,per_resynthesis,delta_per,secs_conversion,secs_source,leakage,"
        "delta_rel_improvement,init_fingerprint\n";
  for (const auto& r : results) {
    char fp[32];
    std::snprintf(fp, sizeof(fp), "%016llx", static_cast<unsigned long long>(r.init_fingerprint));
    os << r.variant.Label() << std::fixed << std::setprecision(6) << "," << r.report.per_conversion << ","
       << r.report.per_resynthesis << "," << r.report.delta_per << "," << r.report.secs_conversion << ","
       << r.report.secs_source << "," << r.mean_leakage << ","
       << RelativeImprovement(results.front().report.delta_per, r.report.delta_per) << "," << fp << "\n";
    os.unsetf(std::ios::floatfield);
  }
  return os.str();
}

nlohmann::json CompareJson(const std::vector<VariantResult>& results) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : results) {
    char fp[32];
    std::snprintf(fp, sizeof(fp), "%016llx", static_cast<unsigned long long>(r.init_fingerprint));
    rows.push_back({{"variant", r.variant.Label()},
                    {"per_conversion", r.report.per_conversion},
                    {"per_resynthesis", r.report.per_resynthesis},
                    {"delta_per", r.report.delta_per},
                    {"per_conversion_utterance_mean", r.report.per_conversion_utt},
                    {"per_resynthesis_utterance_mean", r.report.per_resynthesis_utt},
                    {"delta_per_utterance_mean", r.report.delta_per_utt},
                    {"secs_conversion", r.report.secs_conversion},
                    {"secs_source", r.report.secs_source},
                    {"mean_leakage", r.mean_leakage},
                    {"final_loss", r.final_loss},
                    {"delta_rel_improvement", RelativeImprovement(results.front().report.delta_per, r.report.delta_per)},
                    {"init_fingerprint", fp}});
  }
  return rows;
}

}  // namespace umvc
