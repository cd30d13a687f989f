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

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "selfd/core/types.hpp"

namespace selfd::core {

// Binary PPM (P6, maxval 255). Lossless for images on the 8-bit grid.
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

/// 8-bit interleaved pixels, used by the training image cache.
struct ByteImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;
};

ByteImage read_ppm_bytes(const std::filesystem::path& path);
Image to_float(const ByteImage& bytes);

}  // namespace selfd::core
