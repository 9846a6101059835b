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

#include "umvc/dsp.h"

#include <cmath>
#include <complex>
#include <numbers>

#include "umvc/error.h"

namespace umvc {

namespace {

bool IsPowerOfTwo(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT; data.size() is a power of two.
void Fft(std::vector<std::complex<double>>& data) {
  const size_t n = data.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (size_t start = 0; start < n; start += len) {
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = std::polar(1.0, angle * static_cast<double>(k));
        const std::complex<double> u = data[start + k];
        const std::complex<double> v = data[start + k + len / 2] * w;
        data[start + k] = u + v;
        data[start + k + len / 2] = u - v;
      }
    }
  }
}

}  // namespace

int MelConfig::WindowSamples(int sample_rate) const {
  return static_cast<int>(std::lround(window_ms * 1e-3 * sample_rate));
}

int MelConfig::HopSamples(int sample_rate) const {
  return static_cast<int>(std::lround(hop_ms * 1e-3 * sample_rate));
}

void MelConfig::Validate(int sample_rate) const {
  if (sample_rate <= 0) throw Error(ErrorKind::kConfigInvalid, "sample_rate must be positive");
  if (!IsPowerOfTwo(fft_size)) throw Error(ErrorKind::kConfigInvalid, "fft_size must be a power of two");
  const int window = WindowSamples(sample_rate);
  if (window < 1 || HopSamples(sample_rate) < 1)
    throw Error(ErrorKind::kConfigInvalid, "window and hop must each cover at least one sample");
  if (fft_size < window)
    throw Error(ErrorKind::kConfigInvalid, "fft_size " + std::to_string(fft_size) +
                                               " is smaller than the window (" +
                                               std::to_string(window) + " samples)");
  if (n_mels < 1 || n_mels >= fft_size / 2)
    throw Error(ErrorKind::kConfigInvalid, "n_mels " + std::to_string(n_mels) +
                                               " must be in [1, fft_size/2)");
  if (!(log_floor > 0.0)) throw Error(ErrorKind::kConfigInvalid, "log_floor must be positive");
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> HannWindow(int length) {
  std::vector<double> w(length, 1.0);
  if (length == 1) return w;
  for (int n = 0; n < length; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / (length - 1));
  return w;
}

Eigen::MatrixXd FrameSignal(const AudioBuffer& audio, const MelConfig& config) {
  config.Validate(audio.sample_rate);
  const int window = config.WindowSamples(audio.sample_rate);
  const int hop = config.HopSamples(audio.sample_rate);
  const int n = static_cast<int>(audio.samples.size());
  if (n < window)
    throw Error(ErrorKind::kAudioTooShort, std::to_string(n) + " samples, need at least " +
                                               std::to_string(window));
  const int num_frames = (n - window) / hop + 1;
  const std::vector<double> hann = HannWindow(window);
  Eigen::MatrixXd frames(num_frames, window);
  for (int t = 0; t < num_frames; ++t)
    for (int i = 0; i < window; ++i) frames(t, i) = audio.samples[t * hop + i] * hann[i];
  return frames;
}

std::vector<double> PowerSpectrum(std::span<const double> frame, int fft_size) {
  if (!IsPowerOfTwo(fft_size) || static_cast<int>(frame.size()) > fft_size)
    throw Error(ErrorKind::kConfigInvalid, "frame longer than fft_size or fft_size not a power of two");
  std::vector<std::complex<double>> buf(fft_size);
  for (size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
  Fft(buf);
  std::vector<double> power(fft_size / 2 + 1);
  for (size_t k = 0; k < power.size(); ++k) power[k] = std::norm(buf[k]);
  return power;
}

std::vector<double> MelCenterFrequencies(const MelConfig& config, int sample_rate) {
  const double mel_hi = HzToMel(sample_rate / 2.0);
  const double step = mel_hi / (config.n_mels + 1);
  std::vector<double> centers(config.n_mels);
  for (int m = 0; m < config.n_mels; ++m) centers[m] = MelToHz(step * (m + 1));
  return centers;
}

Eigen::MatrixXd MelFilterbank(const MelConfig& config, int sample_rate) {
  config.Validate(sample_rate);
  const int num_bins = config.fft_size / 2 + 1;
  const double mel_hi = HzToMel(sample_rate / 2.0);
  const double step = mel_hi / (config.n_mels + 1);
  const double bin_hz = static_cast<double>(sample_rate) / config.fft_size;

  Eigen::MatrixXd bank = Eigen::MatrixXd::Zero(config.n_mels, num_bins);
  for (int m = 0; m < config.n_mels; ++m) {
    const double left = step * m, center = step * (m + 1), right = step * (m + 2);
    for (int k = 0; k < num_bins; ++k) {
      const double mel = HzToMel(k * bin_hz);
      if (mel > left && mel < right) {
        bank(m, k) = mel <= center ? (mel - left) / (center - left)
                                   : (right - mel) / (right - center);
      }
    }
    if (bank.row(m).maxCoeff() <= 0.0)
      throw Error(ErrorKind::kConfigInvalid, "mel filter " + std::to_string(m) +
                                                 " covers no FFT bin; reduce n_mels");
  }
  return bank;
}

MelSpectrogram ComputeLogMel(const AudioBuffer& audio, const MelConfig& config) {
  const Eigen::MatrixXd frames = FrameSignal(audio, config);
  const Eigen::MatrixXd bank = MelFilterbank(config, audio.sample_rate);
  const double floor_log = std::log(config.log_floor);

  MelSpectrogram mel;
  mel.config = config;
  mel.frames.resize(frames.rows(), config.n_mels);
  std::vector<double> row(frames.cols());
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    for (Eigen::Index i = 0; i < frames.cols(); ++i) row[i] = frames(t, i);
    const std::vector<double> power = PowerSpectrum(row, config.fft_size);
    const Eigen::Map<const Eigen::VectorXd> p(power.data(), power.size());
    const Eigen::VectorXd energies = bank * p;
    for (int m = 0; m < config.n_mels; ++m)
      mel.frames(t, m) = energies[m] > config.log_floor ? std::log(energies[m]) : floor_log;
  }
  return mel;
}

std::vector<int> UpsampleLabels(std::span<const int> labels, int factor) {
  if (factor < 1) throw Error(ErrorKind::kConfigInvalid, "upsample factor must be >= 1");
  std::vector<int> out;
  out.reserve(labels.size() * factor);
  for (int label : labels) out.insert(out.end(), factor, label);
  return out;
}

}  // namespace umvc
