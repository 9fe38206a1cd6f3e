// Copyright 2026 The revmine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Flat binary parameter files.
//
//   "RVMCKPT\0"  u32 version  u32 count
//   per tensor:  u32 name_len  name  u32 ndim  u64 dims[ndim]  f64 data[]
//
// All integers and floats are little-endian regardless of host order.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "revmine/error.hpp"
#include "revmine/tensor.hpp"

namespace revmine::tensor {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

inline constexpr std::array<char, 8> kCheckpointMagic{'R', 'V', 'M', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class U>
void put_le(std::ostream& os, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <class U>
U get_le(std::istream& in) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) throw FormatError("checkpoint truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const std::vector<NamedTensor>& tensors) {
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_le<std::uint32_t>(os, kCheckpointVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) detail::put_le<std::uint64_t>(os, d);
    for (double v : t.values()) detail::put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw FormatError("checkpoint write failed");
}

inline std::vector<NamedTensor> read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) throw FormatError("not a revmine checkpoint");
  const auto version = detail::get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto count = detail::get_le<std::uint32_t>(in);
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(detail::get_le<std::uint32_t>(in), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) throw FormatError("checkpoint truncated");
    Shape shape(detail::get_le<std::uint32_t>(in));
    for (auto& d : shape) d = detail::get_le<std::uint64_t>(in);
    std::vector<double> values(numel(shape));
    for (auto& v : values) v = std::bit_cast<double>(detail::get_le<std::uint64_t>(in));
    out.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values), true)});
  }
  return out;
}

inline void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write checkpoint '" + path + "'");
  write_checkpoint(os, tensors);
}

inline std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

/// Copies checkpoint values into existing parameters, matching by name and
/// shape.
inline void restore_into(const std::vector<NamedTensor>& saved, std::vector<NamedTensor>& params) {
  if (saved.size() != params.size()) throw FormatError("checkpoint has a different parameter count");
  for (std::size_t i = 0; i < saved.size(); ++i) {
    if (saved[i].name != params[i].name || saved[i].tensor.shape() != params[i].tensor.shape()) {
      throw FormatError("checkpoint parameter '" + saved[i].name + "' does not match '" + params[i].name + "'");
    }
    std::copy(saved[i].tensor.values().begin(), saved[i].tensor.values().end(), params[i].tensor.values().begin());
  }
}

}  // namespace revmine::tensor
