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

#include <array>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "selfd/core/manifest.hpp"
#include "selfd/core/types.hpp"
#include "selfd/planner/network.hpp"

namespace selfd::pseudo {

/// Piecewise-constant speed density over [lo, hi].
struct SpeedHistogram {
  double lo = 0.0;
  double hi = 12.0;
  std::vector<double> counts;

  /// Histogram of `speeds` with `bins` equal-width bins spanning their range (values clamped).
  static SpeedHistogram from_speeds(const std::vector<double>& speeds, int bins = 20);
  /// Inverse-CDF draw for a uniform u in [0, 1).
  double quantile(double u) const;
  double total() const;
};

struct SamplingStrategy {
  core::SamplingKind kind = core::SamplingKind::kUniform;
  double speed_lo = 0.0;
  double speed_hi = 12.0;
  std::array<double, 3> command_weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};  // PRIOR only
  std::optional<SpeedHistogram> speed_histogram;                            // PRIOR only
  int samples_per_frame = 6;
  // FIXED: one guess per frame, for the single-label baseline.
  double fixed_speed = 5.0;
  core::Command fixed_command = core::Command::kForward;

  /// Throws std::invalid_argument on the first violated constraint.
  void validate() const;
};

void to_json(nlohmann::json& j, const SamplingStrategy& s);
void from_json(const nlohmann::json& j, SamplingStrategy& s);

/// PRIOR strategy fitted on labeled data: command frequencies and a speed histogram.
SamplingStrategy prior_from_labeled(const std::vector<core::LabeledSample>& labeled, int samples_per_frame = 6,
                                    int bins = 20);

/// FIXED strategy at command FORWARD and the mean labeled speed.
SamplingStrategy fixed_from_labeled(const std::vector<core::LabeledSample>& labeled);

struct WhatIfInput {
  double speed = 0.0;
  core::Command command = core::Command::kForward;
  friend bool operator==(const WhatIfInput&, const WhatIfInput&) = default;
};

/// One independent draw.
WhatIfInput sample_input(const SamplingStrategy& s, std::mt19937_64& rng);

/// All draws for one frame. UNIFORM is stratified over commands: floor(n/3) per command, the
/// remainder drawn uniformly, then shuffled. Speeds are independent draws.
std::vector<WhatIfInput> sample_frame_inputs(const SamplingStrategy& s, std::mt19937_64& rng);

struct FrameRef {
  std::string image;  // stored in the record
  std::string episode_id;
  int frame_index = 0;
};

/// Teacher plans for the sampled inputs of one frame. The image is encoded once.
std::vector<core::PseudoLabeledSample> what_if_labels(const planner::Planner& teacher, const std::string& teacher_id,
                                                      const core::Image& image, const FrameRef& ref,
                                                      const SamplingStrategy& s, std::mt19937_64& rng);

struct FilterResult {
  std::vector<core::PseudoLabeledSample> kept;
  std::vector<core::PseudoLabeledSample> dropped;
};

/// Partition by teacher quality: kept are those with quality >= sigma_min, order preserved.
FilterResult filter_by_quality(const std::vector<core::PseudoLabeledSample>& records, double sigma_min);

struct PseudoDatasetResult {
  core::ManifestInfo info;
  std::size_t frames = 0;
  std::size_t generated = 0;
  std::size_t kept = 0;
};

/// Pseudo-labels every frame of an unlabeled manifest and writes the kept records to `output`.
/// Frame i draws from an rng seeded with mix_seed(master_seed, i), so the result does not depend on
/// the thread count. Image paths are stored relative to the output manifest directory.
PseudoDatasetResult build_pseudo_dataset(const std::filesystem::path& unlabeled_manifest,
                                         const planner::Planner& teacher, const SamplingStrategy& s,
                                         double sigma_min, std::uint64_t master_seed,
                                         const std::filesystem::path& output, int threads = 1);

/// Re-runs the teacher on every stored (image, speed, command) and counts records whose plan or
/// quality differs in any bit.
std::size_t count_fidelity_mismatches(const std::filesystem::path& pseudo_manifest, const planner::Planner& teacher,
                                      int threads = 1);

}  // namespace selfd::pseudo
