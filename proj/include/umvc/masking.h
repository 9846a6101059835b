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

// Speaker-input masking. A unit-class plan removes every frame whose discrete
// unit belongs to a sampled subset of the utterance's unit classes, so the
// speaker encoder never sees those classes anywhere in the utterance. The
// random-time plan removes one contiguous block and is kept as a baseline.

#ifndef UMVC_MASKING_H_
#define UMVC_MASKING_H_

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "umvc/rng.h"
#include "umvc/units.h"

namespace umvc {

enum class MaskRule { kNone, kUnitClasses, kRandomTime };

std::string MaskRuleName(MaskRule rule);

struct MaskPlan {
  MaskRule rule = MaskRule::kNone;
  std::vector<int> masked_frames;  // strictly ascending, each < total_frames
  std::vector<int> classes;        // kUnitClasses only
  int span_start = 0;              // kRandomTime only
  int span_length = 0;
  int total_frames = 0;

  bool operator==(const MaskPlan&) const = default;
};

struct MaskConfig {
  double unit_mask_ratio = 0.2;
  double random_mask_ratio = 0.0;
  int segment_len = 128;

  void Validate() const;
};

MaskPlan PlanNone(int total_frames);

// Samples n = max(1, floor(ratio * |classes|)) classes without replacement
// (none when ratio is 0 or classes is empty). Returned ascending.
std::vector<int> SelectMaskClasses(std::span<const int> classes, double ratio, Rng& rng);

// Masks every feature frame covered by a unit frame whose label is in
// `classes`; unit frame t covers feature frames [t*rate_factor, (t+1)*rate_factor).
MaskPlan PlanUnitMask(const UnitSequence& z, std::span<const int> classes, int rate_factor);

// One contiguous block of floor(ratio * T) frames at a uniform admissible start.
MaskPlan PlanRandomTimeMask(int total_frames, double ratio, Rng& rng);

// Deletes the masked rows of a time-major feature matrix, keeps the rest in
// order and zero-pads at the end to exactly segment_len rows.
Eigen::MatrixXd ApplyMask(const Eigen::MatrixXd& features, const MaskPlan& plan, int segment_len);

// Zeroes masked rows in place of deleting them; keeps time alignment.
Eigen::MatrixXd ZeroMasked(const Eigen::MatrixXd& features, const MaskPlan& plan);

double MaskedFraction(const MaskPlan& plan);

// Fraction of unit classes present in masked frames that also appear in
// unmasked frames.
double PhoneticLeakage(const UnitSequence& z, const MaskPlan& plan);

nlohmann::json MaskPlanToJson(const MaskPlan& plan);

}  // namespace umvc

#endif  // UMVC_MASKING_H_
