#pragma once

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "auscult/common.hpp"

namespace auscult {

// Mono audio buffer. Samples are dimensionless amplitudes, nominally in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  double rate = 0.0;  // Hz

  double duration_s() const {
    return rate > 0 ? static_cast<double>(samples.size()) / rate : 0.0;
  }
};

namespace detail {

inline uint32_t read_u32le(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
inline uint16_t read_u16le(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

}  // namespace detail

// Reads a RIFF/PCM16 WAV file. Stereo input is downmixed by averaging channels.
inline Waveform read_wav(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open wav file: " + path);
  std::vector<uint8_t> bytes;
  {
    std::fseek(f, 0, SEEK_END);
    long sz = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    bytes.resize(sz > 0 ? size_t(sz) : 0);
    if (!bytes.empty() && std::fread(bytes.data(), 1, bytes.size(), f) != bytes.size()) {
      std::fclose(f);
      throw IoError("short read on wav file: " + path);
    }
    std::fclose(f);
  }
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IoError("not a RIFF/WAVE file: " + path);

  uint16_t channels = 0, bits = 0, format = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  size_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* chunk = bytes.data() + pos;
    uint32_t chunk_size = detail::read_u32le(chunk + 4);
    const uint8_t* body = chunk + 8;
    if (pos + 8 + chunk_size > bytes.size()) chunk_size = uint32_t(bytes.size() - pos - 8);
    if (std::memcmp(chunk, "fmt ", 4) == 0 && chunk_size >= 16) {
      format = detail::read_u16le(body);
      channels = detail::read_u16le(body + 2);
      rate = detail::read_u32le(body + 4);
      bits = detail::read_u16le(body + 14);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = body;
      data_len = chunk_size;
    }
    pos += 8 + chunk_size + (chunk_size & 1);
  }
  if (format != 1 || bits != 16)
    throw IoError("unsupported wav encoding (PCM16 required): " + path);
  if (channels == 0 || rate == 0 || data == nullptr)
    throw IoError("malformed wav file: " + path);

  size_t frames = data_len / (size_t(channels) * 2);
  Waveform w;
  w.rate = rate;
  w.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    float acc = 0.0f;
    for (uint16_t c = 0; c < channels; ++c) {
      int16_t v;
      std::memcpy(&v, data + (i * channels + c) * 2, 2);
      acc += float(v) / 32768.0f;
    }
    w.samples[i] = acc / float(channels);
  }
  return w;
}

// Writes a mono PCM16 WAV file; samples are clipped to [-1, 1].
inline void write_wav(const std::string& path, const Waveform& w) {
  require(w.rate > 0, "write_wav: rate must be positive");
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot create wav file: " + path);
  auto put_u32 = [&](uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    std::fwrite(b, 1, 4, f);
  };
  auto put_u16 = [&](uint16_t v) {
    uint8_t b[2] = {uint8_t(v), uint8_t(v >> 8)};
    std::fwrite(b, 1, 2, f);
  };
  uint32_t n = uint32_t(w.samples.size());
  uint32_t rate = uint32_t(w.rate);
  std::fwrite("RIFF", 1, 4, f);
  put_u32(36 + n * 2);
  std::fwrite("WAVE", 1, 4, f);
  std::fwrite("fmt ", 1, 4, f);
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(rate);
  put_u32(rate * 2);
  put_u16(2);
  put_u16(16);
  std::fwrite("data", 1, 4, f);
  put_u32(n * 2);
  for (float s : w.samples) {
    float c = std::clamp(s, -1.0f, 1.0f);
    int16_t v = int16_t(std::lround(c * 32767.0f));
    uint8_t b[2] = {uint8_t(uint16_t(v)), uint8_t(uint16_t(v) >> 8)};
    std::fwrite(b, 1, 2, f);
  }
  std::fclose(f);
}

}  // namespace auscult
