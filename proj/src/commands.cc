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


#include "umvc/commands.h"

#include <chrono>
#include <cstdio>
#include <map>
#include <sstream>

#include "umvc/error.h"
#include "umvc/io.h"

namespace umvc {

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

// Writes files and records their git blob hashes for the run manifest.
class ArtifactSet {
 public:
  explicit ArtifactSet(std::filesystem::path root) : root_(std::move(root)) {}

  void Write(const std::string& rel, const std::string& bytes) {
    WriteFileBytes(root_ / rel, bytes);
    hashes_[rel] = GitBlobHash(bytes);
  }

  nlohmann::json Json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [rel, hash] : hashes_) j[rel] = hash;
    return j;
  }

 private:
  std::filesystem::path root_;
  std::map<std::string, std::string> hashes_;
};

std::string Hex64(uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Corpus LoadCorpus(const ExperimentConfig& c) {
  const auto dir = CorpusDir(c);
  if (!std::filesystem::exists(dir / "manifest.jsonl"))
    throw Error(ErrorKind::kIo, "no corpus at " + dir.string() + " (run gen-data first)");
  return ReadCorpus(dir);
}

Corpus LoadOrGenerateCorpus(const ExperimentConfig& c, std::ostream& log) {
  if (std::filesystem::exists(CorpusDir(c) / "manifest.jsonl")) return LoadCorpus(c);
  log << "generating corpus in " << CorpusDir(c).string() << "\n";
  Corpus corpus = GenerateCorpus(c.corpus);
  WriteCorpus(CorpusDir(c), corpus);
  return corpus;
}

Codebook LoadCodebook(const ExperimentConfig& c) {
  const auto path = CodebookPath(c);
  if (!std::filesystem::exists(path))
    throw Error(ErrorKind::kIo, "no codebook at " + path.string() + " (run train-kmeans first)");
  return ReadCodebook(path);
}

MelSpectrogram ReadInputMel(const std::filesystem::path& path, const MelConfig& config) {
  if (path.extension() == ".wav") return ComputeLogMel(ReadWav(path), config);
  return ReadMel(path);
}

SpeakerProbe LoadOrTrainProbe(const ExperimentConfig& c, const Corpus& corpus, std::ostream& log) {
  const auto path = ProbePath(c);
  if (std::filesystem::exists(path)) return ReadProbe(path);
  SpeakerProbe probe = TrainProbe(corpus, c);
  EnsureDirectory(path.parent_path());
  WriteProbe(path, probe);
  log << "speaker probe: train accuracy " << probe.train_accuracy << ", held-out accuracy "
      << probe.Accuracy(ProbeHeldOutSamples(corpus)) << " -> " << path.string() << "\n";
  return probe;
}

std::string DirLabel(const MaskVariant& v) {
  std::string s = v.Label();
  for (char& ch : s)
    if (ch == ':') ch = '_';
  return s;
}

std::string TraceHeader() { return "step,loss,siam,cons,total\n"; }

std::string TraceRow(int64_t step, const LossBreakdown& l) {
  return std::to_string(step) + "," + Num(l.loss) + "," + Num(l.siam) + "," + Num(l.cons) + "," + Num(l.total) + "\n";
}

void WriteEvalReport(ArtifactSet& artifacts, const EvalReport& report) {
  artifacts.Write("eval_report.json", EvalReportToJson(report).dump(1) + "\n");
  artifacts.Write("eval_summary.csv", EvalReportSummaryCsv(report));
  artifacts.Write("eval_pairs.csv", EvalReportPairsCsv(report));
}

}  // namespace

ExperimentConfig ResolveConfig(const GlobalOptions& options) {
  ExperimentConfig c = options.config ? LoadConfig(*options.config) : ExperimentConfig{};
  ApplyEnvironment(c);
  if (options.seed) c.seed = *options.seed;
  if (options.out) c.out_dir = *options.out;
  if (options.threads) c.threads = *options.threads;
  c.Validate();
  return c;
}

std::filesystem::path CorpusDir(const ExperimentConfig& c) { return c.out_dir / "corpus"; }
std::filesystem::path CodebookPath(const ExperimentConfig& c) { return c.out_dir / "units" / "codebook.umkm"; }
std::filesystem::path ProbePath(const ExperimentConfig& c) { return c.out_dir / "probe.json"; }
std::filesystem::path RunDir(const ExperimentConfig& c, const MaskVariant& v) {
  return c.out_dir / "runs" / DirLabel(v);
}

void CmdGenData(const ExperimentConfig& c, std::ostream& log) {
  const Corpus corpus = GenerateCorpus(c.corpus);
  WriteCorpus(CorpusDir(c), corpus);
  int counts[3] = {0, 0, 0};
  for (Split s : corpus.speaker_split) ++counts[static_cast<int>(s)];
  log << "wrote " << corpus.utterances.size() << " utterances from " << corpus.speakers.size()
      << " speakers (train/val/test speakers " << counts[0] << "/" << counts[1] << "/" << counts[2] << ") to "
      << CorpusDir(c).string() << "\n";
  log << "manifest " << GitBlobHash(ReadFileBytes(CorpusDir(c) / "manifest.jsonl")) << "\n";
}

void CmdTrainKmeans(const ExperimentConfig& c, std::ostream& log) {
  const Corpus corpus = LoadCorpus(c);
  const KmeansResult km = TrainCodebook(corpus, c);
  const auto dir = CodebookPath(c).parent_path();
  EnsureDirectory(dir);
  ArtifactSet artifacts(dir);
  artifacts.Write("codebook.umkm", EncodeCodebook(km.codebook));

  // Purity on the train split against ground-truth frame labels.
  std::vector<int> units, phonemes;
  for (const auto* u : corpus.InSplit(Split::kTrain)) {
    const UnitSequence z = AssignUnits(UnitFeatures(u->mel, c.units.feature_norm), km.codebook);
    units.insert(units.end(), z.labels.begin(), z.labels.end());
    phonemes.insert(phonemes.end(), u->frame_labels.begin(), u->frame_labels.end());
  }
  const double purity = UnitPurity(units, phonemes, km.codebook.K());
  nlohmann::json info = {{"K", km.codebook.K()},
                         {"iterations", km.iterations},
                         {"inertia_trace", km.inertia_trace},
                         {"train_frames", units.size()},
                         {"purity", purity},
                         {"feature_norm", nlohmann::json(c)["units"]["feature_norm"]},
                         {"seed", c.seed}};
  artifacts.Write("kmeans.json", info.dump(1) + "\n");
  log << "k-means K=" << km.codebook.K() << " converged in " << km.iterations << " iterations, purity " << purity
      << " -> " << CodebookPath(c).string() << "\n";
}

void CmdDiscretize(const ExperimentConfig& c, const DiscretizeOptions& o, std::ostream& log) {
  const Codebook codebook = o.codebook ? ReadCodebook(*o.codebook) : LoadCodebook(c);
  const MelSpectrogram mel = ReadInputMel(o.input, c.mel);
  const UnitSequence z = AssignUnits(UnitFeatures(mel, c.units.feature_norm), codebook, o.rate_factor);
  nlohmann::json runs = nlohmann::json::array();
  for (const UnitRun& r : UnitRuns(z)) runs.push_back({r.label, r.start, r.length});
  const nlohmann::json j = {{"K", z.K}, {"rate_factor", z.rate_factor}, {"labels", z.labels},
                            {"unit_set", UnitSet(z)}, {"runs", runs}};
  if (o.output) {
    if (o.output->has_parent_path()) EnsureDirectory(o.output->parent_path());
    WriteFileBytes(*o.output, j.dump() + "\n");
    log << "wrote " << z.size() << " unit labels to " << o.output->string() << "\n";
  } else {
    log << j.dump() << "\n";
  }
}

void CmdMaskInspect(const ExperimentConfig& c, const MaskInspectOptions& o, std::ostream& log) {
  const Corpus corpus = LoadCorpus(c);
  const MaskVariant variant = o.variant ? MaskVariant::Parse(*o.variant) : c.mask;
  const SyntheticUtterance* utt = nullptr;
  uint64_t item_id = 0;
  for (const auto* u : corpus.InSplit(Split::kTrain)) {
    if (u->id == o.utterance) {
      utt = u;
      break;
    }
    ++item_id;
  }
  if (!utt) {
    for (const auto& u : corpus.utterances)
      if (u.id == o.utterance) utt = &u;
    item_id = 0;
  }
  if (!utt) throw Error(ErrorKind::kIo, "utterance \"" + o.utterance + "\" not in corpus");

  TrainingItem item;
  item.mel = utt->mel.frames;
  nlohmann::json unit_info;
  if (variant.rule != MaskRule::kNone) {
    const Codebook codebook = LoadCodebook(c);
    item.units = AssignUnits(UnitFeatures(utt->mel, c.units.feature_norm), codebook);
    unit_info = {{"labels", item.units.labels}, {"unit_set", UnitSet(item.units)}};
  }
  const TrainConfig t = c.TrainSettings(variant);
  const ItemPlan plan = DrawItemPlan(item, t, o.step, item_id);
  nlohmann::json j = {{"utterance", utt->id},
                      {"variant", variant.Label()},
                      {"step", o.step},
                      {"item_id", item_id},
                      {"crop", {{"start", plan.crop_start}, {"length", plan.crop_length}}},
                      {"speaker_plan", MaskPlanToJson(plan.speaker)},
                      {"siamese_plan", MaskPlanToJson(plan.siamese)},
                      {"phonemes", utt->phonemes},
                      {"segment_len", c.segment_len}};
  if (!unit_info.is_null()) {
    UnitSequence z = item.units;
    z.labels.assign(z.labels.begin() + plan.crop_start, z.labels.begin() + plan.crop_start + plan.crop_length);
    j["units"] = unit_info;
    j["phonetic_leakage"] = PhoneticLeakage(z, plan.speaker);
  }
  log << j.dump(1) << "\n";
}

void CmdTrain(const ExperimentConfig& c, const TrainOptions& o, std::ostream& log) {
  const auto t0 = Clock::now();
  const Corpus corpus = LoadCorpus(c);
  std::optional<Codebook> codebook;
  if (c.mask.rule == MaskRule::kUnitClasses) codebook = LoadCodebook(c);
  const auto items = MakeTrainingItems(corpus, codebook ? &*codebook : nullptr, c.units.feature_norm);
  const TrainConfig train = c.TrainSettings();
  const double setup_s = Seconds(t0);

  const auto dir = RunDir(c, c.mask);
  EnsureDirectory(dir);
  std::optional<Checkpoint> resume;
  std::string trace = TraceHeader();
  if (o.resume) {
    resume = ReadCheckpoint(*o.resume);
    // Keep the recorded rows up to the resumed step.
    if (std::filesystem::exists(dir / "loss_trace.csv")) {
      std::istringstream lines(ReadFileBytes(dir / "loss_trace.csv"));
      std::string line;
      std::getline(lines, line);
      while (std::getline(lines, line))
        if (!line.empty() && std::stoll(line.substr(0, line.find(','))) <= resume->adam.step) trace += line + "\n";
    }
    log << "resuming from " << o.resume->string() << " at step " << resume->adam.step << "\n";
  }

  const nlohmann::json extra = {{"variant", c.mask.Label()}, {"config_hash", ConfigHash(c)}};
  ArtifactSet artifacts(dir);
  const auto t1 = Clock::now();
  const int64_t report_every = std::max<int64_t>(1, train.steps / 10);
  TrainOutcome outcome = TrainModel(
      items, c.model, train, resume ? &*resume : nullptr,
      [&](int64_t step, const ModelParams& params, const AdamState& adam, const LossBreakdown& l) {
        trace += TraceRow(step, l);
        if (step % report_every == 0 || step == train.steps)
          log << "step " << step << "/" << train.steps << " loss " << l.total << "\n";
        if (o.save_every > 0 && step % o.save_every == 0) {
          char name[64];
          std::snprintf(name, sizeof(name), "checkpoints/step_%06lld.umck", static_cast<long long>(step));
          EnsureDirectory(dir / "checkpoints");
          artifacts.Write(name, EncodeCheckpoint({params, adam, train, extra}));
        }
      });
  const double train_s = Seconds(t1);

  artifacts.Write("model.umck", EncodeCheckpoint({outcome.params, outcome.adam, train, extra}));
  artifacts.Write("loss_trace.csv", trace);
  nlohmann::json manifest = {{"command", "train"},
                             {"config_hash", ConfigHash(c)},
                             {"config", c},
                             {"variant", c.mask.Label()},
                             {"seed", c.seed},
                             {"steps", outcome.adam.step},
                             {"init_fingerprint", Hex64(outcome.init_fingerprint)},
                             {"resumed_from_step", resume ? nlohmann::json(resume->adam.step) : nlohmann::json()},
                             {"loss_trace", "loss_trace.csv"},
                             {"artifacts", artifacts.Json()},
                             {"timings", "timings.json"},
                             {"nondeterministic", {"timings.json"}}};
  WriteFileBytes(dir / "run_manifest.json", manifest.dump(1) + "\n");
  const nlohmann::json timings = {{"setup_s", setup_s}, {"train_s", train_s}, {"total_s", Seconds(t0)}};
  WriteFileBytes(dir / "timings.json", timings.dump(1) + "\n");
  log << "checkpoint " << (dir / "model.umck").string() << " (" << train_s << " s)\n";
}

void CmdConvert(const ExperimentConfig& c, const ConvertOptions& o, std::ostream& log) {
  const Checkpoint ckpt = ReadCheckpoint(o.checkpoint);
  const MelSpectrogram source = ReadInputMel(o.source, c.mel);
  const MelSpectrogram reference = ReadInputMel(o.reference, c.mel);
  MelSpectrogram out;
  out.config = source.config;
  out.frames = Convert(ckpt.params, source.frames, reference.frames, ckpt.train.segment_len);
  if (o.output.has_parent_path()) EnsureDirectory(o.output.parent_path());
  WriteMel(o.output, out);
  log << "converted " << out.num_frames() << " frames -> " << o.output.string() << "\n";
}

void CmdEvaluate(const ExperimentConfig& config, const EvaluateOptions& o, std::ostream& log) {
  ExperimentConfig c = config;
  if (o.pairs) c.eval.pairs = *o.pairs;
  c.Validate();
  const auto ckpt_path = o.checkpoint ? *o.checkpoint : RunDir(c, c.mask) / "model.umck";
  const Checkpoint ckpt = ReadCheckpoint(ckpt_path);
  const Corpus corpus = LoadCorpus(c);
  const SpeakerProbe probe = o.probe ? ReadProbe(*o.probe) : LoadOrTrainProbe(c, corpus, log);
  c.segment_len = ckpt.train.segment_len;
  const EvalReport report = EvaluateModel(ckpt.params, corpus, probe, c);
  const auto dir = ckpt_path.has_parent_path() ? ckpt_path.parent_path() : std::filesystem::path(".");
  ArtifactSet artifacts(dir);
  WriteEvalReport(artifacts, report);
  log << "PER conversion " << report.per_conversion << ", resynthesis " << report.per_resynthesis << ", delta "
      << report.delta_per << ", SECS " << report.secs_conversion << " (source " << report.secs_source << ") over "
      << report.pairs.size() << " pairs -> " << (dir / "eval_report.json").string() << "\n";
}

void CmdCompare(const ExperimentConfig& c, const CompareOptions& o, std::ostream& log) {
  std::vector<MaskVariant> variants;
  for (const auto& v : o.variants) variants.push_back(MaskVariant::Parse(v));
  if (variants.empty()) variants = c.compare;
  if (variants.size() < 2) throw Error(ErrorKind::kConfigInvalid, "compare needs at least two variants");

  const auto t0 = Clock::now();
  const Corpus corpus = LoadOrGenerateCorpus(c, log);
  Codebook codebook;
  if (std::filesystem::exists(CodebookPath(c))) {
    codebook = ReadCodebook(CodebookPath(c));
  } else {
    codebook = TrainCodebook(corpus, c).codebook;
    EnsureDirectory(CodebookPath(c).parent_path());
    WriteCodebook(CodebookPath(c), codebook);
  }
  const SpeakerProbe probe = LoadOrTrainProbe(c, corpus, log);

  const auto dir = c.out_dir / "compare";
  EnsureDirectory(dir);
  ArtifactSet artifacts(dir);
  std::vector<VariantResult> results;
  nlohmann::json timings = nlohmann::json::object();
  nlohmann::json variant_artifacts = nlohmann::json::object();
  for (const auto& v : variants) {
    const auto tv = Clock::now();
    log << "variant " << v.Label() << ": training " << c.train.steps << " steps\n";
    VariantResult r = RunVariant(corpus, codebook, probe, c, v);
    log << "variant " << v.Label() << ": init " << Hex64(r.init_fingerprint) << ", delta PER " << r.report.delta_per
        << "\n";
    EnsureDirectory(dir / DirLabel(v));
    ArtifactSet va(dir / DirLabel(v));
    WriteEvalReport(va, r.report);
    variant_artifacts[DirLabel(v)] = va.Json();
    timings[v.Label()] = Seconds(tv);
    results.push_back(std::move(r));
  }
  const std::string table = CompareTable(results);
  artifacts.Write("compare.csv", table);
  artifacts.Write("compare.json", CompareJson(results).dump(1) + "\n");
  timings["total_s"] = Seconds(t0);
  nlohmann::json manifest = {{"command", "compare"},
                             {"config_hash", ConfigHash(c)},
                             {"config", c},
                             {"seed", c.seed},
                             {"artifacts", artifacts.Json()},
                             {"variant_artifacts", variant_artifacts},
                             {"timings", "timings.json"},
                             {"nondeterministic", {"timings.json"}}};
  WriteFileBytes(dir / "run_manifest.json", manifest.dump(1) + "\n");
  WriteFileBytes(dir / "timings.json", timings.dump(1) + "\n");
  log << table;
}

}  // namespace umvc
