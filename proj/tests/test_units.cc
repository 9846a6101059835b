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


#include <set>

#include "doctest.h"

#include "test_support.h"
#include "umvc/error.h"
#include "umvc/units.h"

using namespace umvc;
using umvc::testing::KindOf;

TEST_CASE("fit_kmeans separable points") {
  Eigen::MatrixXd x(4, 1);
  x << 0, 0, 10, 10;
  const KmeansResult r = FitKmeans(x, 2, 50, 1);
  std::set<double> c = {r.codebook.centroids(0, 0), r.codebook.centroids(1, 0)};
  CHECK(c == std::set<double>{0.0, 10.0});
  CHECK(r.codebook.training_inertia == 0.0);
}

TEST_CASE("fit_kmeans with K = N gives each point its own centroid") {
  Eigen::MatrixXd x(5, 2);
  x << 0, 0, 1, 0, 0, 1, 5, 5, -3, 2;
  const KmeansResult r = FitKmeans(x, 5, 50, 7);
  CHECK(r.codebook.training_inertia == 0.0);
  std::set<int> labels(r.assignment.begin(), r.assignment.end());
  CHECK(labels.size() == 5);
}

TEST_CASE("fit_kmeans recovers two Gaussian means") {
  Rng rng(42);
  const Eigen::Vector2d mu_a(-4.0, 1.0), mu_b(3.0, -2.0);
  Eigen::MatrixXd x(200, 2);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d mu = i < 100 ? mu_a : mu_b;
    x(i, 0) = mu[0] + 0.5 * StandardNormal(rng);
    x(i, 1) = mu[1] + 0.5 * StandardNormal(rng);
  }
  const KmeansResult r = FitKmeans(x, 2, 100, 3);
  const Eigen::Vector2d c0 = r.codebook.centroids.row(0).transpose();
  const Eigen::Vector2d c1 = r.codebook.centroids.row(1).transpose();
  const bool direct = (c0 - mu_a).norm() < (c0 - mu_b).norm();
  CHECK(((direct ? c0 : c1) - mu_a).norm() < 0.5);
  CHECK(((direct ? c1 : c0) - mu_b).norm() < 0.5);
}

TEST_CASE("fit_kmeans errors") {
  Eigen::MatrixXd x(3, 2);
  x.setRandom();
  CHECK(KindOf([&] { FitKmeans(x, 4, 10, 1); }) == ErrorKind::kTooFewPoints);
}

TEST_CASE("property: inertia non-increasing, deterministic, assignment reproduces training labels") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const int K = 2 + static_cast<int>(UniformIndex(rng, 6));
    const Eigen::MatrixXd x = testing::RandomMatrix(60 + 10 * trial, 3, rng);
    const KmeansResult r = FitKmeans(x, K, 100, trial);
    for (size_t i = 1; i < r.inertia_trace.size(); ++i) CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] + 1e-9);
    const KmeansResult again = FitKmeans(x, K, 100, trial);
    CHECK(again.codebook.centroids == r.codebook.centroids);
    CHECK(again.assignment == r.assignment);
    CHECK(AssignUnits(x, r.codebook).labels == r.assignment);

    for (int k = 0; k < K; ++k)
      for (int j = k + 1; j < K; ++j) CHECK(r.codebook.centroids.row(k) != r.codebook.centroids.row(j));
    const UnitSequence self = AssignUnits(r.codebook.centroids, r.codebook);
    for (int k = 0; k < K; ++k) CHECK(self.labels[k] == k);
  }
}

TEST_CASE("assign_units exact match, ties and dimension mismatch") {
  Codebook cb;
  cb.centroids = Eigen::MatrixXd::Zero(8, 2);
  for (int k = 0; k < 8; ++k) cb.centroids.row(k) << 10.0 * k, 0.0;
  cb.centroids.row(2) << 1.0, 0.0;
  cb.centroids.row(5) << -1.0, 0.0;
  Eigen::MatrixXd f(2, 2);
  f << 70.0, 0.0, 0.0, 0.0;
  // centroid 0 is (0,0); move it away so (0,0) is equidistant to 2 and 5.
  cb.centroids.row(0) << 0.0, 50.0;
  const UnitSequence z = AssignUnits(f, cb);
  CHECK(z.labels == std::vector<int>{7, 2});
  CHECK(z.K == 8);
  CHECK(KindOf([&] { AssignUnits(Eigen::MatrixXd::Zero(2, 3), cb); }) == ErrorKind::kDimensionMismatch);
}

TEST_CASE("unit_set and unit_runs") {
  auto seq = [](std::vector<int> l) {
    UnitSequence z;
    z.labels = std::move(l);
    z.K = 100;
    return z;
  };
  CHECK(UnitSet(seq({5, 7, 5, 9, 7})) == std::vector<int>{5, 7, 9});
  CHECK(UnitSet(seq({3, 3, 3})) == std::vector<int>{3});
  CHECK(UnitSet(seq({0})) == std::vector<int>{0});
  CHECK(UnitRuns(seq({5, 5, 7, 9, 9, 9})) == std::vector<UnitRun>{{5, 0, 2}, {7, 2, 1}, {9, 3, 3}});
  CHECK(UnitRuns(seq({1})) == std::vector<UnitRun>{{1, 0, 1}});
  CHECK(UnitRuns(seq({1, 2, 1, 2})).size() == 4);

  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const UnitSequence z = testing::RandomUnitSequence(rng, 6, 30);
    const auto runs = UnitRuns(z);
    std::vector<int> rebuilt;
    std::set<int> run_labels;
    for (const auto& r : runs) {
      CHECK(r.start == static_cast<int>(rebuilt.size()));
      rebuilt.insert(rebuilt.end(), r.length, r.label);
      run_labels.insert(r.label);
    }
    CHECK(rebuilt == z.labels);
    for (size_t i = 1; i < runs.size(); ++i) CHECK(runs[i].label != runs[i - 1].label);
    const auto set = UnitSet(z);
    CHECK(std::vector<int>(run_labels.begin(), run_labels.end()) == set);
  }
}

TEST_CASE("utterance MVN features") {
  Rng rng(1);
  MelSpectrogram m;
  m.frames = testing::RandomMatrix(30, 5, rng, 3.0).array() + 2.0;
  const Eigen::MatrixXd f = UnitFeatures(m, FeatureNorm::kUtteranceMvn);
  CHECK(f.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(UnitFeatures(m, FeatureNorm::kNone) == m.frames);
}

TEST_CASE("codebook file round trip and determinism") {
  const auto dir = testing::ScratchDir("units_io");
  Rng rng(6);
  const KmeansResult r = FitKmeans(testing::RandomMatrix(50, 4, rng), 5, 50, 2);
  WriteCodebook(dir / "a.umkm", r.codebook);
  const Codebook back = ReadCodebook(dir / "a.umkm");
  CHECK(back.centroids == r.codebook.centroids);
  CHECK(EncodeCodebook(back) == EncodeCodebook(r.codebook));
  const std::string bytes = EncodeCodebook(r.codebook);
  CHECK(bytes.substr(0, 4) == "UMKM");
  CHECK_THROWS_AS(DecodeCodebook(bytes.substr(0, bytes.size() - 1), "short"), Error);
}
