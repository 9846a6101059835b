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

// Log-mel front end: Hann-windowed framing, power spectra, triangular mel
// filterbank and natural-log compression.

#ifndef UMVC_DSP_H_
#define UMVC_DSP_H_

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace umvc {

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;
};

struct MelConfig {
  int n_mels = 80;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 512;
  double log_floor = 1e-10;

  int WindowSamples(int sample_rate) const;
  int HopSamples(int sample_rate) const;
  // Throws ConfigInvalid when the invariants do not hold at this rate.
  void Validate(int sample_rate) const;

  bool operator==(const MelConfig&) const = default;
};

// frames is T x n_mels (time-major).
struct MelSpectrogram {
  Eigen::MatrixXd frames;
  MelConfig config;

  int num_frames() const { return static_cast<int>(frames.rows()); }
  int num_mels() const { return static_cast<int>(frames.cols()); }
};

// Returns T x window matrix of Hann-windowed frames; partial trailing
// windows are dropped.
Eigen::MatrixXd FrameSignal(const AudioBuffer& audio, const MelConfig& config);

std::vector<double> HannWindow(int length);

// |X_k|^2 for k in [0, fft_size/2]; the frame is zero-padded to fft_size.
std::vector<double> PowerSpectrum(std::span<const double> frame, int fft_size);

// n_mels x (fft_size/2 + 1) triangular filters on the HTK mel scale spanning
// [0, sample_rate/2].
Eigen::MatrixXd MelFilterbank(const MelConfig& config, int sample_rate);

// Center frequency (Hz) of each filter in MelFilterbank.
std::vector<double> MelCenterFrequencies(const MelConfig& config,
                                         int sample_rate);

MelSpectrogram ComputeLogMel(const AudioBuffer& audio, const MelConfig& config);

std::vector<int> UpsampleLabels(std::span<const int> labels, int factor);

double HzToMel(double hz);
double MelToHz(double mel);

}  // namespace umvc

#endif  // UMVC_DSP_H_
