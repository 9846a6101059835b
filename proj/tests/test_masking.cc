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
#include <set>
#include <vector>

#include "doctest.h"

#include "test_support.h"
#include "umvc/masking.h"

using namespace umvc;
using umvc::testing::KindOf;
using umvc::testing::RandomUnitSequence;

namespace {

UnitSequence Seq(std::vector<int> labels, int rate_factor = 1) {
  UnitSequence z;
  z.labels = std::move(labels);
  z.K = 100;
  z.rate_factor = rate_factor;
  return z;
}

MaskPlan Frames(std::vector<int> masked, int total) {
  MaskPlan p;
  p.rule = MaskRule::kRandomTime;
  p.masked_frames = std::move(masked);
  p.total_frames = total;
  return p;
}

// Reference: scan every feature frame and test its unit label directly.
std::vector<int> BruteForceMasked(const UnitSequence& z, const std::vector<int>& classes) {
  std::vector<int> out;
  for (int f = 0; f < z.size() * z.rate_factor; ++f) {
    const int label = z.labels[f / z.rate_factor];
    if (std::find(classes.begin(), classes.end(), label) != classes.end()) out.push_back(f);
  }
  return out;
}

}  // namespace

TEST_CASE("select_mask_classes size rule") {
  Rng rng(3);
  const std::vector<int> five = {3, 7, 12, 45, 88};
  const auto one = SelectMaskClasses(five, 0.2, rng);
  REQUIRE(one.size() == 1);
  CHECK(std::find(five.begin(), five.end(), one[0]) != five.end());

  CHECK(SelectMaskClasses(five, 0.0, rng).empty());
  const std::vector<int> two = {4, 9};
  CHECK(SelectMaskClasses(two, 0.1, rng).size() == 1);
  CHECK(SelectMaskClasses(std::vector<int>{}, 0.5, rng).empty());
  CHECK(SelectMaskClasses(five, 1.0, rng) == five);
}

TEST_CASE("select_mask_classes is uniform over classes") {
  Rng rng(11);
  const std::vector<int> classes = {0, 1, 2, 3};
  std::vector<int> hits(4, 0);
  const int trials = 8000;
  for (int i = 0; i < trials; ++i) ++hits[SelectMaskClasses(classes, 0.25, rng)[0]];
  for (int h : hits) CHECK(std::abs(h - trials / 4) < 150);
}

TEST_CASE("plan_unit_mask examples") {
  CHECK(PlanUnitMask(Seq({5, 7, 5, 9, 7}), std::vector<int>{5}, 1).masked_frames == std::vector<int>{0, 2});
  CHECK(PlanUnitMask(Seq({5, 7}), std::vector<int>{5}, 2).masked_frames == std::vector<int>{0, 1});

  const UnitSequence z = Seq({5, 7, 5, 9, 7});
  const MaskPlan all = PlanUnitMask(z, UnitSet(z), 1);
  CHECK(all.masked_frames == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(all.rule == MaskRule::kUnitClasses);
  CHECK(all.total_frames == 5);

  CHECK(KindOf([&] { PlanUnitMask(z, std::vector<int>{6}, 1); }) == ErrorKind::kUnknownClass);
}

TEST_CASE("plan_random_time_mask examples") {
  Rng rng(5);
  const MaskPlan p = PlanRandomTimeMask(10, 0.2, rng);
  REQUIRE(p.masked_frames.size() == 2);
  CHECK(p.masked_frames[1] == p.masked_frames[0] + 1);
  CHECK(p.span_start == p.masked_frames[0]);
  CHECK(p.span_length == 2);

  CHECK(PlanRandomTimeMask(10, 0.0, rng).masked_frames.empty());
  CHECK(PlanRandomTimeMask(10, 1.0, rng).masked_frames.size() == 10);
}

TEST_CASE("random time starts cover every admissible position") {
  Rng rng(17);
  std::set<int> starts;
  for (int i = 0; i < 2000; ++i) {
    const MaskPlan p = PlanRandomTimeMask(10, 0.3, rng);
    REQUIRE(p.span_start + p.span_length <= 10);
    starts.insert(p.span_start);
  }
  CHECK(starts == std::set<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("apply_mask examples") {
  Eigen::MatrixXd f(5, 2);
  for (int t = 0; t < 5; ++t) f.row(t) << t + 1, -(t + 1);
  const Eigen::MatrixXd out = ApplyMask(f, Frames({0, 2}, 5), 5);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(5, 2);
  expected.row(0) = f.row(1);
  expected.row(1) = f.row(3);
  expected.row(2) = f.row(4);
  CHECK(out == expected);

  CHECK(ApplyMask(f, PlanNone(5), 5) == f);
  CHECK(ApplyMask(f, Frames({0, 1, 2, 3, 4}, 5), 5).isZero(0.0));

  CHECK(KindOf([&] { ApplyMask(f, Frames({0}, 6), 8); }) == ErrorKind::kPlanMismatch);
  CHECK(KindOf([&] { ApplyMask(f, PlanNone(5), 4); }) == ErrorKind::kPlanMismatch);

  const Eigen::MatrixXd zeroed = ZeroMasked(f, Frames({1}, 5));
  CHECK(zeroed.row(1).isZero(0.0));
  CHECK(zeroed.row(0) == f.row(0));
}

TEST_CASE("masked_fraction examples") {
  CHECK(MaskedFraction(Frames({0, 2}, 5)) == doctest::Approx(0.4));
  CHECK(MaskedFraction(PlanNone(5)) == 0.0);
  CHECK(MaskedFraction(Frames({0, 1, 2}, 3)) == 1.0);
}

TEST_CASE("phonetic_leakage examples") {
  const UnitSequence z = Seq({1, 2, 1});
  CHECK(PhoneticLeakage(z, Frames({0}, 3)) == 1.0);
  CHECK(PhoneticLeakage(Seq({1, 1, 2}), Frames({0, 1}, 3)) == 0.0);
  CHECK(PhoneticLeakage(z, PlanUnitMask(z, std::vector<int>{1}, 1)) == 0.0);
  CHECK(PhoneticLeakage(z, PlanNone(3)) == 0.0);
}

TEST_CASE("property: unit plans are exact, leak nothing and keep apply_mask invariants") {
  Rng rng(2026);
  for (int trial = 0; trial < 1000; ++trial) {
    UnitSequence z = RandomUnitSequence(rng, 1 + static_cast<int>(UniformIndex(rng, 12)), 60);
    z.rate_factor = 1 + static_cast<int>(UniformIndex(rng, 3));
    const double ratio = UniformRange(rng, 0.0, 1.0);
    const std::vector<int> classes = SelectMaskClasses(UnitSet(z), ratio, rng);
    const MaskPlan plan = PlanUnitMask(z, classes, z.rate_factor);

    REQUIRE(plan.masked_frames == BruteForceMasked(z, classes));
    REQUIRE(PhoneticLeakage(z, plan) == 0.0);
    REQUIRE(std::is_sorted(plan.masked_frames.begin(), plan.masked_frames.end()));
    REQUIRE(std::adjacent_find(plan.masked_frames.begin(), plan.masked_frames.end()) ==
            plan.masked_frames.end());

    const int T = plan.total_frames;
    const int segment_len = T + static_cast<int>(UniformIndex(rng, 8));
    const Eigen::MatrixXd f = testing::RandomMatrix(T, 3, rng);
    const Eigen::MatrixXd out = ApplyMask(f, plan, segment_len);
    REQUIRE(out.rows() == segment_len);
    const int kept = T - static_cast<int>(plan.masked_frames.size());
    REQUIRE(out.bottomRows(segment_len - kept).cwiseAbs().sum() == 0.0);
    // Kept rows are the unmasked rows in order.
    int row = 0;
    for (int t = 0; t < T; ++t) {
      if (std::binary_search(plan.masked_frames.begin(), plan.masked_frames.end(), t)) continue;
      REQUIRE(out.row(row++) == f.row(t));
    }
  }
}

TEST_CASE("property: random time masks leak on interleaved sequences") {
  Rng rng(99);
  double total = 0.0;
  const int trials = 1000;
  for (int trial = 0; trial < trials; ++trial) {
    UnitSequence z = Seq({});
    const int T = 40;
    for (int t = 0; t < T; ++t) z.labels.push_back(static_cast<int>(UniformIndex(rng, 4)));
    const MaskPlan plan = PlanRandomTimeMask(T, 0.2, rng);
    for (int t : plan.masked_frames) REQUIRE(t < T);
    total += PhoneticLeakage(z, plan);
  }
  CHECK(total / trials > 0.0);
}

TEST_CASE("seed determinism") {
  const UnitSequence z = Seq({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  for (uint64_t seed : {1ULL, 2ULL, 77ULL}) {
    Rng a(seed), b(seed);
    CHECK(SelectMaskClasses(UnitSet(z), 0.3, a) == SelectMaskClasses(UnitSet(z), 0.3, b));
    CHECK(PlanRandomTimeMask(50, 0.2, a) == PlanRandomTimeMask(50, 0.2, b));
  }
}

TEST_CASE("plan json carries rule-specific fields") {
  const UnitSequence z = Seq({5, 7, 5});
  const auto j = MaskPlanToJson(PlanUnitMask(z, std::vector<int>{5}, 1));
  CHECK(j["rule"] == MaskRuleName(MaskRule::kUnitClasses));
  CHECK(j["classes"] == std::vector<int>{5});
  CHECK(j["masked_frames"] == std::vector<int>{0, 2});
  CHECK(j["total_frames"] == 3);
  CHECK(!j.contains("span"));
  Rng rng(1);
  const auto r = MaskPlanToJson(PlanRandomTimeMask(10, 0.2, rng));
  CHECK(r["span"]["length"] == 2);
}
