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

#include "umvc/masking.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "umvc/dsp.h"
#include "umvc/error.h"

namespace umvc {

std::string MaskRuleName(MaskRule rule) {
  switch (rule) {
    case MaskRule::kNone: return "none";
    case MaskRule::kUnitClasses: return "unit_classes";
    case MaskRule::kRandomTime: return "random_time";
  }
  return "unknown";
}

void MaskConfig::Validate() const {
  auto in_unit = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!in_unit(unit_mask_ratio) || !in_unit(random_mask_ratio))
    throw Error(ErrorKind::kConfigInvalid, "mask ratios must lie in [0, 1]");
  if (segment_len < 1) throw Error(ErrorKind::kConfigInvalid, "segment_len must be >= 1");
}

MaskPlan PlanNone(int total_frames) {
  MaskPlan plan;
  plan.total_frames = total_frames;
  return plan;
}

std::vector<int> SelectMaskClasses(std::span<const int> classes, double ratio, Rng& rng) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw Error(ErrorKind::kConfigInvalid, "mask ratio must lie in [0, 1]");
  if (ratio == 0.0 || classes.empty()) return {};
  const size_t n = std::max<size_t>(1, static_cast<size_t>(std::floor(ratio * classes.size())));
  std::vector<int> pool(classes.begin(), classes.end());
  for (size_t i = 0; i < n; ++i) {
    const size_t j = i + UniformIndex(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

MaskPlan PlanUnitMask(const UnitSequence& z, std::span<const int> classes, int rate_factor) {
  if (rate_factor < 1) throw Error(ErrorKind::kConfigInvalid, "rate_factor must be >= 1");
  const std::vector<int> present = UnitSet(z);
  std::set<int> selected;
  for (int c : classes) {
    if (!std::binary_search(present.begin(), present.end(), c))
      throw Error(ErrorKind::kUnknownClass, "class " + std::to_string(c) + " does not occur in z");
    selected.insert(c);
  }
  MaskPlan plan;
  plan.rule = MaskRule::kUnitClasses;
  plan.classes.assign(selected.begin(), selected.end());
  plan.total_frames = z.size() * rate_factor;
  for (int t = 0; t < z.size(); ++t)
    if (selected.contains(z.labels[t]))
      for (int r = 0; r < rate_factor; ++r) plan.masked_frames.push_back(t * rate_factor + r);
  return plan;
}

MaskPlan PlanRandomTimeMask(int total_frames, double ratio, Rng& rng) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw Error(ErrorKind::kConfigInvalid, "mask ratio must lie in [0, 1]");
  MaskPlan plan;
  plan.rule = MaskRule::kRandomTime;
  plan.total_frames = total_frames;
  const int length = static_cast<int>(std::floor(ratio * total_frames));
  if (length == 0) return plan;
  const int start = static_cast<int>(UniformIndex(rng, total_frames - length + 1));
  plan.span_start = start;
  plan.span_length = length;
  for (int t = start; t < start + length; ++t) plan.masked_frames.push_back(t);
  return plan;
}

namespace {

void CheckPlan(const Eigen::MatrixXd& features, const MaskPlan& plan) {
  if (plan.total_frames != features.rows())
    throw Error(ErrorKind::kPlanMismatch, "plan covers " + std::to_string(plan.total_frames) +
                                              " frames, features have " +
                                              std::to_string(features.rows()));
}

}  // namespace

Eigen::MatrixXd ApplyMask(const Eigen::MatrixXd& features, const MaskPlan& plan, int segment_len) {
  CheckPlan(features, plan);
  if (features.rows() > segment_len)
    throw Error(ErrorKind::kPlanMismatch, std::to_string(features.rows()) +
                                              " frames exceed segment_len " +
                                              std::to_string(segment_len));
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(segment_len, features.cols());
  auto masked = plan.masked_frames.begin();
  Eigen::Index row = 0;
  for (Eigen::Index t = 0; t < features.rows(); ++t) {
    if (masked != plan.masked_frames.end() && *masked == t) {
      ++masked;
      continue;
    }
    out.row(row++) = features.row(t);
  }
  return out;
}

Eigen::MatrixXd ZeroMasked(const Eigen::MatrixXd& features, const MaskPlan& plan) {
  CheckPlan(features, plan);
  Eigen::MatrixXd out = features;
  for (int t : plan.masked_frames) out.row(t).setZero();
  return out;
}

double MaskedFraction(const MaskPlan& plan) {
  if (plan.total_frames == 0) return 0.0;
  return static_cast<double>(plan.masked_frames.size()) / plan.total_frames;
}

double PhoneticLeakage(const UnitSequence& z, const MaskPlan& plan) {
  const std::vector<int> labels = UpsampleLabels(z.labels, z.rate_factor);
  if (static_cast<int>(labels.size()) != plan.total_frames)
    throw Error(ErrorKind::kPlanMismatch, "unit sequence and plan cover different frame counts");
  std::vector<bool> is_masked(labels.size(), false);
  for (int t : plan.masked_frames) is_masked[t] = true;
  std::set<int> in_masked, in_unmasked;
  for (size_t t = 0; t < labels.size(); ++t)
    (is_masked[t] ? in_masked : in_unmasked).insert(labels[t]);
  if (in_masked.empty()) return 0.0;
  int leaked = 0;
  for (int c : in_masked) leaked += in_unmasked.contains(c) ? 1 : 0;
  return static_cast<double>(leaked) / in_masked.size();
}

nlohmann::json MaskPlanToJson(const MaskPlan& plan) {
  nlohmann::json j;
  j["rule"] = MaskRuleName(plan.rule);
  if (plan.rule == MaskRule::kUnitClasses) j["classes"] = plan.classes;
  if (plan.rule == MaskRule::kRandomTime)
    j["span"] = {{"start", plan.span_start}, {"length", plan.span_length}};
  j["masked_frames"] = plan.masked_frames;
  j["total_frames"] = plan.total_frames;
  j["fraction"] = MaskedFraction(plan);
  return j;
}

}  // namespace umvc
