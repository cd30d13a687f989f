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

#include "selfd/train/data.hpp"

#include <map>
#include <stdexcept>

#include "selfd/core/image_io.hpp"
#include "selfd/core/manifest.hpp"
#include "selfd/core/parallel.hpp"

namespace selfd::train {
namespace fs = std::filesystem;

std::size_t TrainingSet::image_count() const {
  const std::size_t per = static_cast<std::size_t>(width) * height * 3;
  return per == 0 ? 0 : pixels.size() / per;
}

core::Image TrainingSet::image(std::size_t record) const {
  core::Image img(width, height);
  const std::size_t per = img.data.size();
  const std::uint8_t* src = pixels.data() + image_index.at(record) * per;
  // Same conversion as core::to_float, so cached images match images read from disk.
  for (std::size_t i = 0; i < per; ++i) img.data[i] = static_cast<float>(src[i]) / 255.0f;
  return img;
}

void TrainingSet::pack(std::size_t record, int slot, float* planar, std::size_t stride) const {
  const std::size_t hw = static_cast<std::size_t>(width) * height;
  const std::uint8_t* src = pixels.data() + image_index[record] * hw * 3;
  for (int c = 0; c < 3; ++c) {
    float* dst = planar + c * stride + slot * hw;
    for (std::size_t i = 0; i < hw; ++i) dst[i] = static_cast<float>(src[i * 3 + c]) / 255.0f - 0.5f;
  }
}

namespace {

// Loads the distinct images referenced by `paths` and fills the record -> image mapping.
void load_images(TrainingSet& set, const fs::path& dir, const std::vector<std::string>& paths, int threads) {
  std::map<std::string, std::uint32_t> slot;
  std::vector<std::string> unique;
  set.image_index.clear();
  for (const auto& p : paths) {
    auto [it, inserted] = slot.emplace(p, static_cast<std::uint32_t>(unique.size()));
    if (inserted) unique.push_back(p);
    set.image_index.push_back(it->second);
  }
  if (unique.empty()) return;
  const core::ByteImage first = core::read_ppm_bytes(dir / unique.front());
  set.width = first.width;
  set.height = first.height;
  const std::size_t per = first.data.size();
  set.pixels.assign(per * unique.size(), 0);
  core::parallel_for(unique.size(), threads, [&](std::size_t i) {
    const core::ByteImage img = i == 0 ? first : core::read_ppm_bytes(dir / unique[i]);
    if (img.width != set.width || img.height != set.height) {
      throw std::runtime_error("image " + unique[i] + " has a different resolution");
    }
    std::copy(img.data.begin(), img.data.end(), set.pixels.begin() + static_cast<std::ptrdiff_t>(i * per));
  });
}

}  // namespace

TrainingSet load_labeled_set(const fs::path& manifest, int threads) {
  const auto m = core::read_manifest<core::LabeledSample>(manifest);
  TrainingSet set;
  set.kind = DatasetKind::kLabeled;
  set.fingerprint = core::manifest_fingerprint(manifest);
  set.source = manifest.string();
  std::vector<std::string> paths;
  for (const auto& r : m.records) {
    paths.push_back(r.image);
    set.speeds.push_back(r.speed);
    set.commands.push_back(r.command);
    set.targets.push_back(r.target);
    set.agents.push_back(r.nearby_agents);
  }
  load_images(set, fs::absolute(manifest).parent_path(), paths, threads);
  return set;
}

TrainingSet load_pseudo_set(const fs::path& manifest, int threads) {
  const auto m = core::read_manifest<core::PseudoLabeledSample>(manifest);
  TrainingSet set;
  set.kind = DatasetKind::kPseudo;
  set.fingerprint = core::manifest_fingerprint(manifest);
  set.source = manifest.string();
  std::vector<std::string> paths;
  for (const auto& r : m.records) {
    paths.push_back(r.image);
    set.speeds.push_back(r.sampled_speed);
    set.commands.push_back(r.sampled_command);
    set.targets.push_back(r.pseudo_plan);
  }
  load_images(set, fs::absolute(manifest).parent_path(), paths, threads);
  return set;
}

}  // namespace selfd::train
