// Copyright 2026 The selfd Authors
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

#include "selfd/core/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace selfd::core {

std::string_view command_name(Command c) {
  switch (c) {
    case Command::kLeft:
      return "left";
    case Command::kForward:
      return "forward";
    case Command::kRight:
      return "right";
  }
  return "unknown";
}

double Image::mean() const {
  if (data.empty()) return 0.0;
  double sum = 0.0;
  for (float v : data) sum += v;
  return sum / static_cast<double>(data.size());
}

void quantize(Image& image) {
  for (float& v : image.data) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    v = static_cast<float>(std::lround(c * 255.0f)) / 255.0f;
  }
}

std::string_view sampling_kind_name(SamplingKind k) {
  switch (k) {
    case SamplingKind::kUniform:
      return "uniform";
    case SamplingKind::kPrior:
      return "prior";
    case SamplingKind::kFixed:
      return "fixed";
  }
  return "unknown";
}

SamplingKind sampling_kind_from_name(std::string_view name) {
  if (name == "uniform") return SamplingKind::kUniform;
  if (name == "prior") return SamplingKind::kPrior;
  if (name == "fixed") return SamplingKind::kFixed;
  throw std::invalid_argument("unknown sampling strategy '" + std::string(name) + "'");
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf.data(), 16);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace selfd::core
