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

#include "umvc/units.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "umvc/error.h"
#include "umvc/io.h"
#include "umvc/rng.h"

namespace umvc {

namespace {

// Nearest centroid by squared distance, lowest index on ties.
std::pair<int, double> Nearest(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < centroids.rows(); ++k) {
    const double d = (centroids.row(k) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return {best, best_d};
}

double Assign(const Eigen::MatrixXd& frames, const Eigen::MatrixXd& centroids,
              std::vector<int>& labels, std::vector<double>& dists) {
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < frames.rows(); ++i) {
    const auto [k, d] = Nearest(centroids, frames.row(i));
    labels[i] = k;
    dists[i] = d;
    inertia += d;
  }
  return inertia;
}

Eigen::MatrixXd SeedPlusPlus(const Eigen::MatrixXd& frames, int K, Rng& rng) {
  const Eigen::Index n = frames.rows();
  Eigen::MatrixXd centroids(K, frames.cols());
  centroids.row(0) = frames.row(static_cast<Eigen::Index>(UniformIndex(rng, n)));
  std::vector<double> d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (frames.row(i) - centroids.row(0)).squaredNorm();
  for (int k = 1; k < K; ++k) {
    double total = 0.0;
    for (double d : d2) total += d;
    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double target = Uniform01(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      // Rounding can leave target at the very end of the cumulative sum.
      if (pick < 0)
        for (Eigen::Index i = n - 1; i >= 0; --i)
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
    }
    if (pick < 0)
      throw Error(ErrorKind::kTooFewPoints, "fewer than K=" + std::to_string(K) + " distinct points");
    centroids.row(k) = frames.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (frames.row(i) - centroids.row(k)).squaredNorm());
  }
  return centroids;
}

}  // namespace

KmeansResult FitKmeans(const Eigen::MatrixXd& frames, int K, int max_iters, uint64_t seed) {
  const Eigen::Index n = frames.rows();
  if (K < 2) throw Error(ErrorKind::kConfigInvalid, "K must be at least 2");
  if (frames.cols() < 1) throw Error(ErrorKind::kDimensionMismatch, "frames have no columns");
  if (n < K)
    throw Error(ErrorKind::kTooFewPoints,
                std::to_string(n) + " points for K=" + std::to_string(K));
  if (!frames.allFinite()) throw Error(ErrorKind::kFormat, "k-means input is not finite");

  Rng rng = MakeRng(seed, {0x6b6d});
  KmeansResult result;
  Eigen::MatrixXd centroids = SeedPlusPlus(frames, K, rng);
  std::vector<int> labels(n, -1), prev(n, -1);
  std::vector<double> dists(n);

  for (int iter = 0; iter < std::max(max_iters, 1); ++iter) {
    result.inertia_trace.push_back(Assign(frames, centroids, labels, dists));
    result.iterations = iter + 1;
    if (labels == prev) break;
    prev = labels;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, frames.cols());
    std::vector<int> counts(K, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[i]) += frames.row(i);
      ++counts[labels[i]];
    }
    std::vector<bool> taken(n, false);
    for (int k = 0; k < K; ++k) {
      if (counts[k] > 0) {
        centroids.row(k) = sums.row(k) / counts[k];
        continue;
      }
      // Empty cluster: move to the point farthest from its centroid.
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!taken[i] && (far < 0 || dists[i] > dists[far])) far = i;
      taken[far] = true;
      centroids.row(k) = frames.row(far);
      dists[far] = 0.0;
    }
  }

  RoundToFloat(centroids);
  result.codebook.training_inertia = Assign(frames, centroids, labels, dists);
  result.codebook.centroids = std::move(centroids);
  result.assignment = std::move(labels);
  return result;
}

UnitSequence AssignUnits(const Eigen::MatrixXd& frames, const Codebook& codebook, int rate_factor) {
  if (frames.cols() != codebook.D())
    throw Error(ErrorKind::kDimensionMismatch, "frame dimension " + std::to_string(frames.cols()) +
                                                   " != codebook dimension " +
                                                   std::to_string(codebook.D()));
  if (rate_factor < 1) throw Error(ErrorKind::kConfigInvalid, "rate_factor must be >= 1");
  UnitSequence z;
  z.K = codebook.K();
  z.rate_factor = rate_factor;
  z.labels.resize(frames.rows());
  for (Eigen::Index t = 0; t < frames.rows(); ++t)
    z.labels[t] = Nearest(codebook.centroids, frames.row(t)).first;
  return z;
}

std::vector<int> UnitSet(const UnitSequence& z) {
  std::set<int> s(z.labels.begin(), z.labels.end());
  return {s.begin(), s.end()};
}

std::vector<UnitRun> UnitRuns(const UnitSequence& z) {
  std::vector<UnitRun> runs;
  for (int t = 0; t < z.size(); ++t) {
    if (!runs.empty() && runs.back().label == z.labels[t])
      ++runs.back().length;
    else
      runs.push_back({z.labels[t], t, 1});
  }
  return runs;
}

Eigen::MatrixXd UnitFeatures(const MelSpectrogram& mel, FeatureNorm norm) {
  if (norm == FeatureNorm::kNone) return mel.frames;
  const Eigen::RowVectorXd mean = mel.frames.colwise().mean();
  Eigen::MatrixXd centered = mel.frames.rowwise() - mean;
  const Eigen::RowVectorXd sd =
      (centered.array().square().colwise().mean() + 1e-8).sqrt().matrix();
  return centered.array().rowwise() / sd.array();
}

std::string EncodeCodebook(const Codebook& codebook) {
  ByteWriter w;
  w.Magic("UMKM");
  w.U32(kCodebookFormatVersion);
  w.U32(static_cast<uint32_t>(codebook.K()));
  w.U32(static_cast<uint32_t>(codebook.D()));
  for (int k = 0; k < codebook.K(); ++k)
    for (int d = 0; d < codebook.D(); ++d) w.F32(static_cast<float>(codebook.centroids(k, d)));
  return w.data();
}

Codebook DecodeCodebook(std::string bytes, const std::string& source) {
  ByteReader r(std::move(bytes), source);
  r.ExpectMagic("UMKM");
  if (const uint32_t v = r.U32(); v != kCodebookFormatVersion)
    throw Error(ErrorKind::kFormat, source + ": unsupported codebook version " + std::to_string(v));
  const uint32_t K = r.U32();
  const uint32_t D = r.U32();
  if (K < 2 || D < 1) throw Error(ErrorKind::kFormat, source + ": degenerate codebook shape");
  Codebook cb;
  cb.centroids.resize(K, D);
  for (uint32_t k = 0; k < K; ++k)
    for (uint32_t d = 0; d < D; ++d) cb.centroids(k, d) = r.F32();
  if (!r.AtEnd()) throw Error(ErrorKind::kFormat, source + ": trailing bytes");
  return cb;
}

void WriteCodebook(const std::filesystem::path& path, const Codebook& codebook) {
  WriteFileBytes(path, EncodeCodebook(codebook));
}

Codebook ReadCodebook(const std::filesystem::path& path) {
  return DecodeCodebook(ReadFileBytes(path), path.string());
}

}  // namespace umvc
