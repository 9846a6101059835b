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


// Subcommands of the umvc tool. Each writes its artifacts below the
// configured output directory and returns normally or throws umvc::Error.
//
//   <out>/corpus/                 gen-data
//   <out>/units/codebook.umkm     train-kmeans
//   <out>/probe.json              evaluate, compare
//   <out>/runs/<variant>/         train, evaluate
//   <out>/compare/                compare

#ifndef UMVC_COMMANDS_H_
#define UMVC_COMMANDS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "umvc/experiment.h"

namespace umvc {

struct GlobalOptions {
  std::optional<std::filesystem::path> config;
  std::optional<uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<int> threads;
};

// Defaults, then the config file, then UMVC_SEED / UMVC_THREADS, then flags.
ExperimentConfig ResolveConfig(const GlobalOptions& options);

std::filesystem::path CorpusDir(const ExperimentConfig& c);
std::filesystem::path CodebookPath(const ExperimentConfig& c);
std::filesystem::path ProbePath(const ExperimentConfig& c);
std::filesystem::path RunDir(const ExperimentConfig& c, const MaskVariant& v);

void CmdGenData(const ExperimentConfig& c, std::ostream& log);
void CmdTrainKmeans(const ExperimentConfig& c, std::ostream& log);

struct DiscretizeOptions {
  std::filesystem::path input;  // .wav or .umvc
  std::optional<std::filesystem::path> codebook;
  std::optional<std::filesystem::path> output;  // JSON; stdout when absent
  int rate_factor = 1;
};
void CmdDiscretize(const ExperimentConfig& c, const DiscretizeOptions& o, std::ostream& log);

struct MaskInspectOptions {
  std::string utterance;
  std::optional<std::string> variant;
  int64_t step = 0;
};
void CmdMaskInspect(const ExperimentConfig& c, const MaskInspectOptions& o, std::ostream& log);

struct TrainOptions {
  std::optional<std::filesystem::path> resume;
  int save_every = 0;
};
void CmdTrain(const ExperimentConfig& c, const TrainOptions& o, std::ostream& log);

struct ConvertOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path source;
  std::filesystem::path reference;
  std::filesystem::path output;
};
void CmdConvert(const ExperimentConfig& c, const ConvertOptions& o, std::ostream& log);

struct EvaluateOptions {
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> probe;
  std::optional<int> pairs;
};
void CmdEvaluate(const ExperimentConfig& c, const EvaluateOptions& o, std::ostream& log);

struct CompareOptions {
  std::vector<std::string> variants;  // overrides the config grid when nonempty
};
void CmdCompare(const ExperimentConfig& c, const CompareOptions& o, std::ostream& log);

}  // namespace umvc

#endif  // UMVC_COMMANDS_H_
