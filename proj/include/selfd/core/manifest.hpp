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

// Manifest file layout (format version 1):
//
//   line 1: selfd-manifest <version> <header-json>
//           header-json = {"kind","split","seed","count","checksum"}
//   line 2..count+1: one compact JSON object per record
//
// Record field order is frozen per version:
//   labeled:   image, speed, command, waypoints, quality, episode, frame[, agents]
//   unlabeled: image, episode, frame
//   pseudo:    image, speed, command, waypoints, quality, episode, frame, teacher, strategy
// `waypoints` is [[x, y], ...] in BEV meters. `agents` is [{"length","width","future":[[x,y,yaw],...]}]
// and is omitted when no annotation exists. `checksum` is "fnv1a64:<16 hex>" over the record
// lines including their trailing newlines. Image paths are relative to the manifest directory.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfd/core/types.hpp"

namespace selfd::core {

inline constexpr int kManifestVersion = 1;

enum class ManifestErrorKind {
  kMissingFile,
  kVersionMismatch,
  kChecksumMismatch,
  kCountMismatch,
  kKindMismatch,
  kMissingImage,
  kMalformed,
  kIo,
};

class ManifestError : public std::runtime_error {
 public:
  ManifestError(ManifestErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ManifestErrorKind kind() const { return kind_; }

 private:
  ManifestErrorKind kind_;
};

struct ManifestInfo {
  int version = kManifestVersion;
  std::string kind;
  std::string split;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  std::string checksum;
};

template <typename Record>
struct Manifest {
  ManifestInfo info;
  std::vector<Record> records;
};

template <typename Record>
struct RecordKind;
template <>
struct RecordKind<LabeledSample> {
  static constexpr const char* name = "labeled";
};
template <>
struct RecordKind<UnlabeledFrame> {
  static constexpr const char* name = "unlabeled";
};
template <>
struct RecordKind<PseudoLabeledSample> {
  static constexpr const char* name = "pseudo";
};

struct ReadOptions {
  bool verify_images = true;
};

/// Writes the manifest and returns the header as stored (count and checksum filled in).
template <typename Record>
ManifestInfo write_manifest(const std::filesystem::path& path, const std::string& split, std::uint64_t seed,
                            const std::vector<Record>& records);

template <typename Record>
Manifest<Record> read_manifest(const std::filesystem::path& path, const ReadOptions& options = {});

/// Parses only the header line.
ManifestInfo read_manifest_info(const std::filesystem::path& path);

/// Stable content fingerprint of a manifest file (its header checksum).
std::string manifest_fingerprint(const std::filesystem::path& path);

extern template ManifestInfo write_manifest(const std::filesystem::path&, const std::string&, std::uint64_t,
                                            const std::vector<LabeledSample>&);
extern template ManifestInfo write_manifest(const std::filesystem::path&, const std::string&, std::uint64_t,
                                            const std::vector<UnlabeledFrame>&);
extern template ManifestInfo write_manifest(const std::filesystem::path&, const std::string&, std::uint64_t,
                                            const std::vector<PseudoLabeledSample>&);
extern template Manifest<LabeledSample> read_manifest(const std::filesystem::path&, const ReadOptions&);
extern template Manifest<UnlabeledFrame> read_manifest(const std::filesystem::path&, const ReadOptions&);
extern template Manifest<PseudoLabeledSample> read_manifest(const std::filesystem::path&, const ReadOptions&);

}  // namespace selfd::core
