// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/io/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "mcdk/core/error.hpp"

namespace mcdk {

float tone_map(float linear) {
  const float x = std::max(linear, 0.0f);
  return std::pow(x / (1.0f + x), 1.0f / 2.2f);
}

Tensor<float> tone_map(const Tensor<float>& linear) {
  Tensor<float> out(linear.shape());
  for (Index i = 0; i < linear.size(); ++i) out[i] = tone_map(linear[i]);
  return out;
}

void save_ppm(const std::filesystem::path& path, const Tensor<float>& image) {
  if (image.rank() < 2) throw DimensionError("save_ppm: need at least [H,W]");
  const Index h = image.dim(-2), w = image.dim(-1), plane = h * w;
  const Index channels = image.size() / plane;
  if (channels != 1 && channels != 3) {
    throw DimensionError("save_ppm: expected 1 or 3 channels, got shape " +
                         shape_string(image.shape()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(3 * w));
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      for (Index c = 0; c < 3; ++c) {
        const float v = image[(channels == 3 ? c : 0) * plane + y * w + x];
        const float clamped = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
        row[static_cast<std::size_t>(3 * x + c)] =
            static_cast<unsigned char>(std::lround(clamped * 255.0f));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw DataError("failed writing " + path.string());
}

Tensor<float> load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string magic;
  Index w = 0, h = 0;
  int max_value = 0;
  in >> magic >> w >> h >> max_value;
  if (magic != "P6" || w <= 0 || h <= 0 || max_value != 255) {
    throw DataError(path.string() + " is not an 8-bit P6 image");
  }
  in.get();
  std::vector<unsigned char> bytes(static_cast<std::size_t>(3 * w * h));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw DataError(path.string() + ": truncated pixel data");
  Tensor<float> out(Shape{3, h, w});
  for (Index p = 0; p < h * w; ++p) {
    for (Index c = 0; c < 3; ++c) {
      out[c * h * w + p] = static_cast<float>(bytes[static_cast<std::size_t>(3 * p + c)]) / 255.0f;
    }
  }
  return out;
}

}  // namespace mcdk
