// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/core/tns.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace mcdk {
namespace {

constexpr std::array<char, 4> kMagic{'T', 'N', 'S', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> bytes{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                  static_cast<char>((v >> 16) & 0xff),
                                  static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw DataError("TNS: truncated stream");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_tns(std::ostream& out, const Tensor<float>& tensor) {
  out.write(kMagic.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (Index e : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(e));
  for (float v : tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw DataError("TNS: write failed");
}

Tensor<float> read_tns(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != kMagic) throw DataError("TNS: bad magic");
  const std::uint32_t rank = get_u32(in);
  if (rank < 1 || rank > 4) throw DataError("TNS: unsupported rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& e : shape) {
    e = get_u32(in);
    if (e == 0) throw DataError("TNS: zero extent");
  }
  Tensor<float> t(shape);
  for (float& v : t.mutable_data()) v = std::bit_cast<float>(get_u32(in));
  return t;
}

void save_tns(const std::filesystem::path& path, const Tensor<float>& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_tns(out, tensor);
}

Tensor<float> load_tns(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_tns(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace mcdk
