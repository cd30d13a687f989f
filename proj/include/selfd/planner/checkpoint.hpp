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

// Checkpoint container (version 1), little-endian:
//   8 bytes   magic "SELFDCKP"
//   u32       format version
//   u64       header length L
//   L bytes   JSON header: {"config", "variant", "step", "tag", "tensors": [{"name","rows","cols","offset"}]}
//   ...       float32 tensor data, row-major, at the listed offsets from the end of the header

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "selfd/planner/network.hpp"

namespace selfd::planner {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
  long step = 0;
  std::string tag;  // free-form stage label, e.g. "teacher"
};

void save_checkpoint(const std::filesystem::path& path, const Planner& model, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  Planner model;
  CheckpointMeta meta;
};

/// Loads a checkpoint. When `expected` is given, a differing stored config is an error.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const std::optional<PlannerConfig>& expected = std::nullopt);

/// Hex fingerprint used as the teacher id in pseudo-labeled records.
std::string model_id(const Planner& model);

}  // namespace selfd::planner
