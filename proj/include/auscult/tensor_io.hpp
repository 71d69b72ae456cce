#pragma once

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "auscult/common.hpp"

namespace auscult {

// Portable tensor container ("RSPK1"). One record per tensor:
//   magic "RSPK1" | dtype u8 (0=f32, 1=f64) | ndim u8 | dims u32[ndim]
//   | kind u8 (0=GA, 1=WA, 2=WM, 255=none) | label i32 | name_len u16 | name
//   | row-major payload
// All integers little-endian. Feature-cache records carry an empty name;
// checkpoint records use the name to identify parameters.
struct TensorRecord {
  Shape dims;
  std::vector<float> data;
  uint8_t kind = 255;
  int32_t label = -1;
  std::string name;
};

namespace detail {

inline void put_bytes(FILE* f, const void* p, size_t n) {
  if (std::fwrite(p, 1, n, f) != n) throw IoError("tensor container: write failed");
}
inline void get_bytes(FILE* f, void* p, size_t n) {
  if (std::fread(p, 1, n, f) != n) throw IoError("tensor container: truncated record");
}
inline void put_u32(FILE* f, uint32_t v) {
  uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
  put_bytes(f, b, 4);
}
inline uint32_t get_u32(FILE* f) {
  uint8_t b[4];
  get_bytes(f, b, 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

}  // namespace detail

inline void write_record(FILE* f, const TensorRecord& r) {
  detail::put_bytes(f, "RSPK1", 5);
  uint8_t dtype = 0;  // payload stored as f32
  detail::put_bytes(f, &dtype, 1);
  uint8_t ndim = uint8_t(r.dims.size());
  detail::put_bytes(f, &ndim, 1);
  for (int d : r.dims) detail::put_u32(f, uint32_t(d));
  detail::put_bytes(f, &r.kind, 1);
  detail::put_u32(f, uint32_t(r.label));
  uint16_t nlen = uint16_t(r.name.size());
  uint8_t nb[2] = {uint8_t(nlen), uint8_t(nlen >> 8)};
  detail::put_bytes(f, nb, 2);
  if (nlen) detail::put_bytes(f, r.name.data(), nlen);
  if (!r.data.empty()) detail::put_bytes(f, r.data.data(), r.data.size() * sizeof(float));
}

// Returns false on clean EOF, throws on a malformed record.
inline bool read_record(FILE* f, TensorRecord& r) {
  char magic[5];
  size_t got = std::fread(magic, 1, 5, f);
  if (got == 0) return false;
  if (got != 5 || std::memcmp(magic, "RSPK1", 5) != 0)
    throw IoError("tensor container: bad magic");
  uint8_t dtype, ndim;
  detail::get_bytes(f, &dtype, 1);
  if (dtype != 0) throw IoError("tensor container: unsupported dtype");
  detail::get_bytes(f, &ndim, 1);
  r.dims.resize(ndim);
  for (int i = 0; i < ndim; ++i) r.dims[i] = int(detail::get_u32(f));
  detail::get_bytes(f, &r.kind, 1);
  r.label = int32_t(detail::get_u32(f));
  uint8_t nb[2];
  detail::get_bytes(f, nb, 2);
  uint16_t nlen = uint16_t(nb[0]) | uint16_t(nb[1]) << 8;
  r.name.resize(nlen);
  if (nlen) detail::get_bytes(f, r.name.data(), nlen);
  r.data.resize(size_t(numel(r.dims)));
  if (!r.data.empty()) detail::get_bytes(f, r.data.data(), r.data.size() * sizeof(float));
  return true;
}

inline void write_records(const std::string& path, const std::vector<TensorRecord>& rs) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot create file: " + path);
  try {
    for (const auto& r : rs) write_record(f, r);
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
}

inline std::vector<TensorRecord> read_records(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open file: " + path);
  std::vector<TensorRecord> out;
  try {
    TensorRecord r;
    while (read_record(f, r)) out.push_back(std::move(r));
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return out;
}

}  // namespace auscult
