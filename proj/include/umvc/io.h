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

#ifndef UMVC_IO_H_
#define UMVC_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "umvc/dsp.h"

namespace umvc {

// Little-endian append-only byte sink used by every binary format here.
class ByteWriter {
 public:
  void U32(uint32_t v);
  void F32(float v);
  void Bytes(std::string_view s);
  void Magic(std::string_view magic) { Bytes(magic); }

  const std::string& data() const { return data_; }

 private:
  std::string data_;
};

class ByteReader {
 public:
  ByteReader(std::string data, std::string source);

  uint32_t U32();
  float F32();
  std::string Bytes(size_t n);
  // Throws kFormat naming the source when the magic does not match.
  void ExpectMagic(std::string_view magic);
  bool AtEnd() const { return pos_ == data_.size(); }

 private:
  void Need(size_t n) const;

  std::string data_;
  std::string source_;
  size_t pos_ = 0;
};

std::string ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, std::string_view bytes);
// Creates the directory (and parents); kIo names the path on failure.
void EnsureDirectory(const std::filesystem::path& dir);

// SHA-1 of "blob <len>\0<bytes>", the identifier git assigns to file content.
std::string GitBlobHash(std::string_view bytes);

// Mono PCM16 or IEEE float32 WAV.
AudioBuffer ReadWav(const std::filesystem::path& path);
void WriteWavPcm16(const std::filesystem::path& path, const AudioBuffer& audio);

// "UMVC" | version u32 | T u32 | n_mels u32 | row-major f32 payload.
inline constexpr uint32_t kMelFormatVersion = 1;
std::string EncodeMel(const MelSpectrogram& mel);
MelSpectrogram DecodeMel(std::string bytes, const std::string& source);
void WriteMel(const std::filesystem::path& path, const MelSpectrogram& mel);
MelSpectrogram ReadMel(const std::filesystem::path& path);
std::string MelToCsv(const MelSpectrogram& mel);

// Rounds every value to the nearest float so that in-memory features equal
// their f32 on-disk encoding.
void RoundToFloat(Eigen::MatrixXd& m);

}  // namespace umvc

#endif  // UMVC_IO_H_
