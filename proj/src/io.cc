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

#include "umvc/io.h"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "umvc/error.h"

namespace umvc {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

void ByteWriter::U32(uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  data_.append(buf, 4);
}

void ByteWriter::F32(float v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  data_.append(buf, 4);
}

void ByteWriter::Bytes(std::string_view s) { data_.append(s); }

ByteReader::ByteReader(std::string data, std::string source)
    : data_(std::move(data)), source_(std::move(source)) {}

void ByteReader::Need(size_t n) const {
  if (data_.size() - pos_ < n)
    throw Error(ErrorKind::kFormat, source_ + ": truncated at byte " + std::to_string(pos_));
}

uint32_t ByteReader::U32() {
  Need(4);
  uint32_t v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

float ByteReader::F32() {
  Need(4);
  float v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

std::string ByteReader::Bytes(size_t n) {
  Need(n);
  std::string s = data_.substr(pos_, n);
  pos_ += n;
  return s;
}

void ByteReader::ExpectMagic(std::string_view magic) {
  if (data_.size() - pos_ < magic.size() || Bytes(magic.size()) != magic)
    throw Error(ErrorKind::kFormat, source_ + ": bad magic, expected \"" + std::string(magic) + "\"");
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileBytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "short write to " + path.string());
}

void EnsureDirectory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw Error(ErrorKind::kIo, "cannot create directory " + dir.string() +
                                    (ec ? ": " + ec.message() : ""));
}

std::string GitBlobHash(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

AudioBuffer ReadWav(const std::filesystem::path& path) {
  ByteReader r(ReadFileBytes(path), path.string());
  r.ExpectMagic("RIFF");
  r.U32();
  r.ExpectMagic("WAVE");
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  while (!r.AtEnd()) {
    const std::string id = r.Bytes(4);
    const uint32_t size = r.U32();
    std::string body = r.Bytes(size + (size & 1u));
    if (id == "fmt ") {
      if (size < 16) throw Error(ErrorKind::kFormat, path.string() + ": short fmt chunk");
      std::memcpy(&format, body.data(), 2);
      std::memcpy(&channels, body.data() + 2, 2);
      std::memcpy(&rate, body.data() + 4, 4);
      std::memcpy(&bits, body.data() + 14, 2);
      if (format == 0xFFFE && size >= 26) std::memcpy(&format, body.data() + 24, 2);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw Error(ErrorKind::kFormat, path.string() + ": data before fmt");
      if (channels != 1) throw Error(ErrorKind::kFormat, path.string() + ": only mono is supported");
      AudioBuffer audio;
      audio.sample_rate = static_cast<int>(rate);
      if (format == 1 && bits == 16) {
        audio.samples.resize(size / 2);
        for (size_t i = 0; i < audio.samples.size(); ++i) {
          int16_t s;
          std::memcpy(&s, body.data() + 2 * i, 2);
          audio.samples[i] = s / 32768.0;
        }
      } else if (format == 3 && bits == 32) {
        audio.samples.resize(size / 4);
        for (size_t i = 0; i < audio.samples.size(); ++i) {
          float s;
          std::memcpy(&s, body.data() + 4 * i, 4);
          if (!std::isfinite(s)) throw Error(ErrorKind::kFormat, path.string() + ": non-finite sample");
          audio.samples[i] = s;
        }
      } else {
        throw Error(ErrorKind::kFormat, path.string() + ": unsupported encoding (format " +
                                            std::to_string(format) + ", " + std::to_string(bits) +
                                            " bits)");
      }
      return audio;
    }
  }
  throw Error(ErrorKind::kFormat, path.string() + ": no data chunk");
}

void WriteWavPcm16(const std::filesystem::path& path, const AudioBuffer& audio) {
  const uint32_t data_bytes = static_cast<uint32_t>(audio.samples.size() * 2);
  ByteWriter w;
  w.Magic("RIFF");
  w.U32(36 + data_bytes);
  w.Magic("WAVE");
  w.Magic("fmt ");
  w.U32(16);
  const uint32_t rate = static_cast<uint32_t>(audio.sample_rate);
  const uint16_t header16[2] = {1, 1};
  w.Bytes(std::string_view(reinterpret_cast<const char*>(header16), 4));
  w.U32(rate);
  w.U32(rate * 2);
  const uint16_t tail16[2] = {2, 16};
  w.Bytes(std::string_view(reinterpret_cast<const char*>(tail16), 4));
  w.Magic("data");
  w.U32(data_bytes);
  std::string pcm(data_bytes, '\0');
  for (size_t i = 0; i < audio.samples.size(); ++i) {
    const double clipped = std::clamp(audio.samples[i], -1.0, 32767.0 / 32768.0);
    const int16_t s = static_cast<int16_t>(std::lround(clipped * 32768.0));
    std::memcpy(pcm.data() + 2 * i, &s, 2);
  }
  w.Bytes(pcm);
  WriteFileBytes(path, w.data());
}

std::string EncodeMel(const MelSpectrogram& mel) {
  ByteWriter w;
  w.Magic("UMVC");
  w.U32(kMelFormatVersion);
  w.U32(static_cast<uint32_t>(mel.num_frames()));
  w.U32(static_cast<uint32_t>(mel.num_mels()));
  for (int t = 0; t < mel.num_frames(); ++t)
    for (int m = 0; m < mel.num_mels(); ++m) w.F32(static_cast<float>(mel.frames(t, m)));
  return w.data();
}

MelSpectrogram DecodeMel(std::string bytes, const std::string& source) {
  ByteReader r(std::move(bytes), source);
  r.ExpectMagic("UMVC");
  const uint32_t version = r.U32();
  if (version != kMelFormatVersion)
    throw Error(ErrorKind::kFormat, source + ": unsupported mel version " + std::to_string(version));
  const uint32_t frames = r.U32();
  const uint32_t mels = r.U32();
  if (frames == 0 || mels == 0) throw Error(ErrorKind::kFormat, source + ": empty mel");
  MelSpectrogram mel;
  mel.config.n_mels = static_cast<int>(mels);
  mel.frames.resize(frames, mels);
  for (uint32_t t = 0; t < frames; ++t)
    for (uint32_t m = 0; m < mels; ++m) mel.frames(t, m) = r.F32();
  if (!r.AtEnd()) throw Error(ErrorKind::kFormat, source + ": trailing bytes");
  if (!mel.frames.allFinite()) throw Error(ErrorKind::kFormat, source + ": non-finite values");
  return mel;
}

void WriteMel(const std::filesystem::path& path, const MelSpectrogram& mel) {
  WriteFileBytes(path, EncodeMel(mel));
}

MelSpectrogram ReadMel(const std::filesystem::path& path) {
  return DecodeMel(ReadFileBytes(path), path.string());
}

std::string MelToCsv(const MelSpectrogram& mel) {
  std::ostringstream out;
  out << std::setprecision(9);
  out << "frame";
  for (int m = 0; m < mel.num_mels(); ++m) out << ",mel" << m;
  out << '\n';
  for (int t = 0; t < mel.num_frames(); ++t) {
    out << t;
    for (int m = 0; m < mel.num_mels(); ++m) out << ',' << static_cast<float>(mel.frames(t, m));
    out << '\n';
  }
  return out.str();
}

void RoundToFloat(Eigen::MatrixXd& m) {
  m = m.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

}  // namespace umvc
