// src/wav.cpp

// Copyright 2026  TSR Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABILITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "tsr/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace tsr {

namespace {

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

void put_u16(std::vector<unsigned char>& out, uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

}  // namespace

AudioSignal read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  TSR_REQUIRE_RUNTIME(f.good(), "wav_open_failed: " << path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  TSR_CHECK(bytes.size() >= 44, "wav_truncated: " << path);
  TSR_CHECK(std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
                std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
            "wav_not_riff: " << path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  size_t data_off = 0, data_len = 0;
  bool have_fmt = false;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    uint32_t chunk_len = read_u32(hdr + 4);
    size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0 && body + 16 <= bytes.size()) {
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      sample_rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_off = body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  TSR_CHECK(have_fmt && data_off > 0, "wav_missing_chunks: " << path);
  TSR_CHECK(format == 1, "wav_not_pcm: format tag " << format << " in " << path);
  TSR_CHECK(channels == 1, "wav_not_mono: " << channels << " channels in " << path);
  TSR_CHECK(bits == 16, "wav_not_16bit: " << bits << " bits in " << path);
  TSR_CHECK(data_off + data_len <= bytes.size(), "wav_truncated_data: " << path);

  size_t n = data_len / 2;
  TSR_CHECK(n > 0, "wav_empty: " << path);
  AudioSignal sig;
  sig.sample_rate = static_cast<int>(sample_rate);
  sig.samples.resize(static_cast<Eigen::Index>(n));
  const unsigned char* d = bytes.data() + data_off;
  for (size_t i = 0; i < n; ++i) {
    int16_t s = static_cast<int16_t>(d[2 * i] | (d[2 * i + 1] << 8));
    sig.samples(static_cast<Eigen::Index>(i)) = static_cast<double>(s) / 32767.0;
  }
  return sig;
}

void write_wav(const std::string& path, const AudioSignal& signal) {
  signal.validate();
  const auto n = static_cast<uint32_t>(signal.samples.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * n);

  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<uint32_t>(signal.sample_rate));
  put_u32(out, static_cast<uint32_t>(signal.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, 2 * n);

  for (Eigen::Index i = 0; i < signal.samples.size(); ++i) {
    double x = signal.samples(i) * 32767.0;
    long q = std::lround(x);
    if (q > 32767) q = 32767;
    if (q < -32768) q = -32768;
    put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  TSR_REQUIRE_RUNTIME(f.good(), "wav_write_open_failed: " << path);
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  TSR_REQUIRE_RUNTIME(f.good(), "wav_write_failed: " << path);
}

}  // namespace tsr
