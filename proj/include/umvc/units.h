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

// Frame discretization: k-means codebooks and per-frame unit sequences.

#ifndef UMVC_UNITS_H_
#define UMVC_UNITS_H_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "umvc/dsp.h"

namespace umvc {

struct Codebook {
  Eigen::MatrixXd centroids;  // K x D
  // Not part of the on-disk format; NaN after loading.
  double training_inertia = std::numeric_limits<double>::quiet_NaN();

  int K() const { return static_cast<int>(centroids.rows()); }
  int D() const { return static_cast<int>(centroids.cols()); }
};

struct UnitSequence {
  std::vector<int> labels;
  int K = 0;
  // Feature frames per unit frame.
  int rate_factor = 1;

  int size() const { return static_cast<int>(labels.size()); }
};

struct UnitRun {
  int label;
  int start;
  int length;

  bool operator==(const UnitRun&) const = default;
};

struct KmeansResult {
  Codebook codebook;
  std::vector<int> assignment;
  // Inertia after each assignment step, in order.
  std::vector<double> inertia_trace;
  int iterations = 0;
};

KmeansResult FitKmeans(const Eigen::MatrixXd& frames, int K, int max_iters, uint64_t seed);

UnitSequence AssignUnits(const Eigen::MatrixXd& frames, const Codebook& codebook,
                         int rate_factor = 1);

std::vector<int> UnitSet(const UnitSequence& z);

std::vector<UnitRun> UnitRuns(const UnitSequence& z);

enum class FeatureNorm { kNone, kUtteranceMvn };

// Per-utterance features fed to the clusterer: raw log-mel frames or
// per-bin mean/variance normalized frames.
Eigen::MatrixXd UnitFeatures(const MelSpectrogram& mel, FeatureNorm norm);

// "UMKM" | version u32 | K u32 | D u32 | row-major f32 centroids.
inline constexpr uint32_t kCodebookFormatVersion = 1;
std::string EncodeCodebook(const Codebook& codebook);
Codebook DecodeCodebook(std::string bytes, const std::string& source);
void WriteCodebook(const std::filesystem::path& path, const Codebook& codebook);
Codebook ReadCodebook(const std::filesystem::path& path);

}  // namespace umvc

#endif  // UMVC_UNITS_H_
