// stwb/io.hpp

// Copyright 2026  The STWB Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef STWB_IO_HPP_
#define STWB_IO_HPP_

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stwb/common.hpp"
#include "stwb/tensor.hpp"

namespace stwb {

// All binary artifacts are little-endian. The helpers below byte-swap on
// big-endian hosts so files stay interchangeable.

namespace detail {
inline bool host_is_little_endian() {
  const uint32_t probe = 1;
  return *reinterpret_cast<const unsigned char*>(&probe) == 1;
}

template <typename T>
inline void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if (!host_is_little_endian()) {
    for (size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
inline T read_le(std::istream& is, const std::string& what) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  require_data(static_cast<bool>(is), "truncated read of " + what);
  if (!host_is_little_endian()) {
    for (size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}
}  // namespace detail

// Frame-stream file: header `T F sample_rate` as three little-endian int32,
// then T*F little-endian float32 values, row-major. This is the on-disk form
// of synthetic audio and of CMVN statistics.
inline void write_frame_stream(const std::string& path, const Tensor& frames,
                               int32_t sample_rate) {
  std::ofstream os(path, std::ios::binary);
  require_data(static_cast<bool>(os), "cannot open for write: " + path);
  detail::write_le<int32_t>(os, frames.rows());
  detail::write_le<int32_t>(os, frames.cols());
  detail::write_le<int32_t>(os, sample_rate);
  for (size_t i = 0; i < frames.size(); ++i)
    detail::write_le<float>(os, static_cast<float>(frames[i]));
  require_data(static_cast<bool>(os), "write failed: " + path);
}

inline Tensor read_frame_stream(const std::string& path, int32_t* sample_rate) {
  std::ifstream is(path, std::ios::binary);
  require_data(static_cast<bool>(is), "cannot open: " + path);
  int32_t t = detail::read_le<int32_t>(is, path);
  int32_t f = detail::read_le<int32_t>(is, path);
  int32_t sr = detail::read_le<int32_t>(is, path);
  require_data(t >= 0 && f > 0, "bad frame-stream header in " + path);
  Tensor frames(t, f);
  for (size_t i = 0; i < frames.size(); ++i)
    frames[i] = static_cast<double>(detail::read_le<float>(is, path));
  if (sample_rate) *sample_rate = sr;
  return frames;
}

// Named-tensor container used by checkpoints: a text header terminated by a
// line "data", then raw little-endian float64 blobs in header order. float64
// is required by the checkpoint round-trip tolerance; frame streams stay
// float32.
struct NamedTensorFile {
  std::vector<std::pair<std::string, std::string>> header;  // key, value
  std::vector<std::pair<std::string, Tensor>> tensors;
};

inline void write_named_tensors(const std::string& path, const NamedTensorFile& f) {
  std::ofstream os(path, std::ios::binary);
  require_data(static_cast<bool>(os), "cannot open for write: " + path);
  os << "STWBTENSORS1\n";
  for (const auto& [k, v] : f.header) os << "kv " << k << " " << v << "\n";
  for (const auto& [name, t] : f.tensors) {
    os << "tensor " << name << " " << t.ndim();
    for (int d : t.shape()) os << " " << d;
    os << " f64\n";
  }
  os << "data\n";
  for (const auto& [name, t] : f.tensors) {
    (void)name;
    for (size_t i = 0; i < t.size(); ++i) detail::write_le<double>(os, t[i]);
  }
  require_data(static_cast<bool>(os), "write failed: " + path);
}

inline NamedTensorFile read_named_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require_data(static_cast<bool>(is), "cannot open: " + path);
  std::string line;
  require_data(static_cast<bool>(std::getline(is, line)) && line == "STWBTENSORS1",
               "bad magic in " + path);
  NamedTensorFile f;
  std::vector<std::vector<int>> shapes;
  while (std::getline(is, line)) {
    if (line == "data") break;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "kv") {
      require_data(tok.size() >= 3, "bad kv line in " + path);
      // value may contain spaces: rejoin everything after the key
      std::string val = tok[2];
      for (size_t i = 3; i < tok.size(); ++i) val += " " + tok[i];
      f.header.emplace_back(tok[1], val);
    } else if (tok[0] == "tensor") {
      require_data(tok.size() >= 4, "bad tensor line in " + path);
      int nd = static_cast<int>(parse_int(tok[2], "tensor ndim"));
      require_data(static_cast<int>(tok.size()) == 3 + nd + 1, "bad tensor line in " + path);
      require_data(tok.back() == "f64", "unsupported dtype in " + path);
      std::vector<int> shape;
      for (int i = 0; i < nd; ++i)
        shape.push_back(static_cast<int>(parse_int(tok[3 + i], "tensor dim")));
      f.tensors.emplace_back(tok[1], Tensor(shape));
      shapes.push_back(shape);
    } else {
      throw DataError("unexpected line in " + path + ": " + line);
    }
  }
  for (auto& [name, t] : f.tensors) {
    for (size_t i = 0; i < t.size(); ++i)
      t[i] = detail::read_le<double>(is, path + " tensor " + name);
  }
  return f;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require_data(static_cast<bool>(is), "cannot open: " + path);
  std::string s((std::istreambuf_iterator<char>(is)),
                std::istreambuf_iterator<char>());
  return s;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  require_data(static_cast<bool>(os), "cannot open for write: " + path);
  os << text;
  require_data(static_cast<bool>(os), "write failed: " + path);
}

inline void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  require_data(!ec, "cannot create directory: " + path);
}

}  // namespace stwb

#endif  // STWB_IO_HPP_
