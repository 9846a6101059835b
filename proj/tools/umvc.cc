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


#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "umvc/commands.h"
#include "umvc/error.h"

int main(int argc, char** argv) {
  CLI::App app{"Unit-class masking voice conversion toolkit"};
  app.require_subcommand(1);

  umvc::GlobalOptions global;
  std::string config_path, out_dir;
  uint64_t seed = 0;
  int threads = 1;
  auto* config_opt = app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "global seed");
  auto* out_opt = app.add_option("--out", out_dir, "output directory");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
  auto* kmeans = app.add_subcommand("train-kmeans", "fit the unit codebook on the train split");

  umvc::DiscretizeOptions disc;
  std::string disc_codebook, disc_output;
  auto* discretize = app.add_subcommand("discretize", "assign unit labels to a mel or wav file");
  discretize->add_option("input", disc.input, "input .umvc or .wav")->required();
  auto* disc_cb_opt = discretize->add_option("--codebook", disc_codebook, "codebook file");
  auto* disc_out_opt = discretize->add_option("--output", disc_output, "output JSON");
  discretize->add_option("--rate-factor", disc.rate_factor, "mel frames per unit")->check(CLI::PositiveNumber);

  umvc::MaskInspectOptions inspect;
  std::string inspect_variant;
  auto* mask = app.add_subcommand("mask-inspect", "show the masks drawn for one utterance");
  mask->add_option("utterance", inspect.utterance, "utterance id")->required();
  auto* inspect_variant_opt = mask->add_option("--variant", inspect_variant, "none | unit:R | random_time:R");
  mask->add_option("--step", inspect.step, "training step");

  umvc::TrainOptions train_opts;
  std::string resume;
  auto* train = app.add_subcommand("train", "train one variant");
  auto* resume_opt = train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_option("--save-every", train_opts.save_every, "write a checkpoint every N steps");

  umvc::ConvertOptions conv;
  auto* convert = app.add_subcommand("convert", "convert a source utterance to a reference voice");
  convert->add_option("--checkpoint", conv.checkpoint)->required();
  convert->add_option("--source", conv.source)->required();
  convert->add_option("--reference", conv.reference)->required();
  convert->add_option("--output", conv.output)->required();

  umvc::EvaluateOptions eval;
  std::string eval_ckpt, eval_probe;
  int eval_pairs = 0;
  auto* evaluate = app.add_subcommand("evaluate", "score conversion and resynthesis on the test split");
  auto* eval_ckpt_opt = evaluate->add_option("--checkpoint", eval_ckpt);
  auto* eval_probe_opt = evaluate->add_option("--probe", eval_probe);
  auto* eval_pairs_opt = evaluate->add_option("--pairs", eval_pairs)->check(CLI::PositiveNumber);

  umvc::CompareOptions cmp;
  auto* compare = app.add_subcommand("compare", "train and evaluate several variants");
  compare->add_option("--variants", cmp.variants, "variants, e.g. none unit:0.2")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(umvc::ExitCode::kConfig);
  }

  try {
    if (*config_opt) global.config = config_path;
    if (*seed_opt) global.seed = seed;
    if (*out_opt) global.out = out_dir;
    if (*threads_opt) global.threads = threads;
    const umvc::ExperimentConfig config = umvc::ResolveConfig(global);

    if (*gen) {
      umvc::CmdGenData(config, std::cout);
    } else if (*kmeans) {
      umvc::CmdTrainKmeans(config, std::cout);
    } else if (*discretize) {
      if (*disc_cb_opt) disc.codebook = disc_codebook;
      if (*disc_out_opt) disc.output = disc_output;
      umvc::CmdDiscretize(config, disc, std::cout);
    } else if (*mask) {
      if (*inspect_variant_opt) inspect.variant = inspect_variant;
      umvc::CmdMaskInspect(config, inspect, std::cout);
    } else if (*train) {
      if (*resume_opt) train_opts.resume = resume;
      umvc::CmdTrain(config, train_opts, std::cout);
    } else if (*convert) {
      umvc::CmdConvert(config, conv, std::cout);
    } else if (*evaluate) {
      if (*eval_ckpt_opt) eval.checkpoint = eval_ckpt;
      if (*eval_probe_opt) eval.probe = eval_probe;
      if (*eval_pairs_opt) eval.pairs = eval_pairs;
      umvc::CmdEvaluate(config, eval, std::cout);
    } else if (*compare) {
      umvc::CmdCompare(config, cmp, std::cout);
    }
  } catch (const umvc::Error& e) {
    std::cerr << "umvc: " << e.what() << "\n";
    return static_cast<int>(umvc::ExitCodeFor(e.kind()));
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "umvc: " << e.what() << "\n";
    return static_cast<int>(umvc::ExitCode::kData);
  } catch (const std::exception& e) {
    std::cerr << "umvc: " << e.what() << "\n";
    return static_cast<int>(umvc::ExitCode::kData);
  }
  return 0;
}
