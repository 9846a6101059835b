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


// Generators and oracles shared by the unit tests.

#ifndef UMVC_TESTS_TEST_SUPPORT_H_
#define UMVC_TESTS_TEST_SUPPORT_H_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"

#include "umvc/error.h"
#include "umvc/rng.h"
#include "umvc/units.h"

namespace umvc::testing {

inline Eigen::MatrixXd RandomMatrix(int rows, int cols, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * StandardNormal(rng);
  return m;
}

// Labels in [0, K) with runs of random length, like unit sequences of speech.
inline UnitSequence RandomUnitSequence(Rng& rng, int K, int max_len) {
  UnitSequence z;
  z.K = K;
  const int len = 1 + static_cast<int>(UniformIndex(rng, max_len));
  while (z.size() < len) {
    const int label = static_cast<int>(UniformIndex(rng, K));
    const int run = 1 + static_cast<int>(UniformIndex(rng, 4));
    for (int r = 0; r < run && z.size() < len; ++r) z.labels.push_back(label);
  }
  return z;
}

inline std::vector<int> RandomTokens(Rng& rng, int alphabet, int max_len) {
  std::vector<int> v(UniformIndex(rng, max_len + 1));
  for (int& x : v) x = static_cast<int>(UniformIndex(rng, alphabet));
  return v;
}

// Kind of the umvc::Error thrown by f; fails the test if none is thrown.
inline ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected umvc::Error");
  return ErrorKind::kFormat;
}

// Central differences of f at x, one cell at a time.
inline Eigen::MatrixXd NumericGradient(const std::function<double(const Eigen::MatrixXd&)>& f,
                                       Eigen::MatrixXd x, double h = 1e-6) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = f(x);
    x.data()[i] = saved - h;
    const double down = f(x);
    x.data()[i] = saved;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

// Max over cells of |a - n| / max(|a|, |n|); cells within atol count as 0.
inline double MaxRelativeError(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric,
                               double atol = 1e-7) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i], n = numeric.data()[i];
    if (std::abs(a - n) <= atol) continue;
    worst = std::max(worst, std::abs(a - n) / std::max(std::abs(a), std::abs(n)));
  }
  return worst;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path ScratchDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("umvc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace umvc::testing

#endif  // UMVC_TESTS_TEST_SUPPORT_H_
