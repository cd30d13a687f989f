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

#include "selfd/core/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace selfd::core {

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write image " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::string bytes(image.data.size(), '\0');
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    bytes[i] = static_cast<char>(std::lround(std::clamp(image.data[i], 0.0f, 1.0f) * 255.0f));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ByteImage read_ppm_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image " + path.string());
  std::string magic;
  int maxval = 0;
  ByteImage img;
  in >> magic >> img.width >> img.height >> maxval;
  if (magic != "P6" || maxval != 255 || img.width <= 0 || img.height <= 0) {
    throw std::runtime_error("unsupported image format: " + path.string());
  }
  in.get();  // single whitespace after maxval
  img.data.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (!in) throw std::runtime_error("truncated image: " + path.string());
  return img;
}

Image to_float(const ByteImage& bytes) {
  Image img(bytes.width, bytes.height);
  for (std::size_t i = 0; i < bytes.data.size(); ++i) img.data[i] = static_cast<float>(bytes.data[i]) / 255.0f;
  return img;
}

Image read_ppm(const std::filesystem::path& path) { return to_float(read_ppm_bytes(path)); }

}  // namespace selfd::core
