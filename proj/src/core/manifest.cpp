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

#include "selfd/core/manifest.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_set>

namespace selfd::core {
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kMagic = "selfd-manifest";

ojson plan_points(const WaypointPlan& plan) {
  ojson pts = ojson::array();
  for (const Vec2& p : plan.waypoints) pts.push_back({p.x, p.y});
  return pts;
}

std::vector<Vec2> parse_points(const ojson& j) {
  std::vector<Vec2> out;
  out.reserve(j.size());
  for (const auto& p : j) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return out;
}

ojson to_json(const LabeledSample& s) {
  ojson j;
  j["image"] = s.image;
  j["speed"] = s.speed;
  j["command"] = command_code(s.command);
  j["waypoints"] = plan_points(s.target);
  j["quality"] = s.target.quality;
  j["episode"] = s.episode_id;
  j["frame"] = s.frame_index;
  if (s.nearby_agents) {
    ojson agents = ojson::array();
    for (const AgentTrack& a : *s.nearby_agents) {
      ojson aj;
      aj["length"] = a.length;
      aj["width"] = a.width;
      ojson fut = ojson::array();
      for (const Pose2& p : a.future) fut.push_back({p.x, p.y, p.yaw});
      aj["future"] = std::move(fut);
      agents.push_back(std::move(aj));
    }
    j["agents"] = std::move(agents);
  }
  return j;
}

ojson to_json(const UnlabeledFrame& s) {
  ojson j;
  j["image"] = s.image;
  j["episode"] = s.episode_id;
  j["frame"] = s.frame_index;
  return j;
}

ojson to_json(const PseudoLabeledSample& s) {
  ojson j;
  j["image"] = s.image;
  j["speed"] = s.sampled_speed;
  j["command"] = command_code(s.sampled_command);
  j["waypoints"] = plan_points(s.pseudo_plan);
  j["quality"] = s.pseudo_plan.quality;
  j["episode"] = s.episode_id;
  j["frame"] = s.frame_index;
  j["teacher"] = s.teacher_id;
  j["strategy"] = std::string(sampling_kind_name(s.sampling_strategy));
  return j;
}

void from_json(const ojson& j, LabeledSample& s) {
  s.image = j.at("image").get<std::string>();
  s.speed = j.at("speed").get<double>();
  s.command = command_from_code(j.at("command").get<int>());
  s.target.waypoints = parse_points(j.at("waypoints"));
  s.target.quality = j.at("quality").get<double>();
  s.episode_id = j.at("episode").get<std::string>();
  s.frame_index = j.at("frame").get<int>();
  if (j.contains("agents")) {
    std::vector<AgentTrack> agents;
    for (const auto& aj : j.at("agents")) {
      AgentTrack a;
      a.length = aj.at("length").get<double>();
      a.width = aj.at("width").get<double>();
      for (const auto& p : aj.at("future")) {
        a.future.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
      }
      agents.push_back(std::move(a));
    }
    s.nearby_agents = std::move(agents);
  }
}

void from_json(const ojson& j, UnlabeledFrame& s) {
  s.image = j.at("image").get<std::string>();
  s.episode_id = j.at("episode").get<std::string>();
  s.frame_index = j.at("frame").get<int>();
}

void from_json(const ojson& j, PseudoLabeledSample& s) {
  s.image = j.at("image").get<std::string>();
  s.sampled_speed = j.at("speed").get<double>();
  s.sampled_command = command_from_code(j.at("command").get<int>());
  s.pseudo_plan.waypoints = parse_points(j.at("waypoints"));
  s.pseudo_plan.quality = j.at("quality").get<double>();
  s.episode_id = j.at("episode").get<std::string>();
  s.frame_index = j.at("frame").get<int>();
  s.teacher_id = j.at("teacher").get<std::string>();
  s.sampling_strategy = sampling_kind_from_name(j.at("strategy").get<std::string>());
}

std::string checksum_string(std::uint64_t h) { return "fnv1a64:" + hex64(h); }

ManifestInfo parse_header(const std::string& line, const fs::path& path) {
  std::istringstream in(line);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kMagic) throw ManifestError(ManifestErrorKind::kMalformed, "not a manifest: " + path.string());
  if (version != kManifestVersion) {
    throw ManifestError(ManifestErrorKind::kVersionMismatch,
                        "manifest version " + std::to_string(version) + " (expected " +
                            std::to_string(kManifestVersion) + "): " + path.string());
  }
  std::string rest;
  std::getline(in, rest);
  ManifestInfo info;
  try {
    const auto h = nlohmann::json::parse(rest);
    info.version = version;
    info.kind = h.at("kind").get<std::string>();
    info.split = h.at("split").get<std::string>();
    info.seed = h.at("seed").get<std::uint64_t>();
    info.count = h.at("count").get<std::size_t>();
    info.checksum = h.at("checksum").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(ManifestErrorKind::kMalformed, "bad manifest header in " + path.string() + ": " + e.what());
  }
  return info;
}

std::ifstream open_existing(const fs::path& path) {
  if (!fs::exists(path)) throw ManifestError(ManifestErrorKind::kMissingFile, "manifest not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError(ManifestErrorKind::kIo, "cannot open " + path.string());
  return in;
}

}  // namespace

template <typename Record>
ManifestInfo write_manifest(const fs::path& path, const std::string& split, std::uint64_t seed,
                            const std::vector<Record>& records) {
  std::string body;
  for (const Record& r : records) {
    body += to_json(r).dump();
    body += '\n';
  }
  ManifestInfo info;
  info.kind = RecordKind<Record>::name;
  info.split = split;
  info.seed = seed;
  info.count = records.size();
  info.checksum = checksum_string(fnv1a64(body));

  ojson header;
  header["kind"] = info.kind;
  header["split"] = info.split;
  header["seed"] = info.seed;
  header["count"] = info.count;
  header["checksum"] = info.checksum;

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ManifestError(ManifestErrorKind::kIo, "cannot write " + tmp.string());
    out << kMagic << ' ' << kManifestVersion << ' ' << header.dump() << '\n' << body;
    if (!out) throw ManifestError(ManifestErrorKind::kIo, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
  return info;
}

template <typename Record>
Manifest<Record> read_manifest(const fs::path& path, const ReadOptions& options) {
  std::ifstream in = open_existing(path);
  std::string line;
  if (!std::getline(in, line)) throw ManifestError(ManifestErrorKind::kMalformed, "empty manifest: " + path.string());
  Manifest<Record> m;
  m.info = parse_header(line, path);
  if (m.info.kind != RecordKind<Record>::name) {
    throw ManifestError(ManifestErrorKind::kKindMismatch, "manifest " + path.string() + " holds '" + m.info.kind +
                                                              "' records, expected '" + RecordKind<Record>::name +
                                                              "'");
  }

  std::uint64_t h = 0xcbf29ce484222325ULL;
  const fs::path dir = path.parent_path();
  std::unordered_set<std::string> seen_images;
  m.records.reserve(m.info.count);
  while (std::getline(in, line)) {
    h = fnv1a64(line, h);
    h = fnv1a64("\n", h);
    Record r;
    try {
      from_json(ojson::parse(line), r);
    } catch (const std::exception& e) {
      throw ManifestError(ManifestErrorKind::kMalformed,
                          "bad record " + std::to_string(m.records.size()) + " in " + path.string() + ": " + e.what());
    }
    if (options.verify_images && seen_images.insert(r.image).second && !fs::exists(dir / r.image)) {
      throw ManifestError(ManifestErrorKind::kMissingImage, "missing image " + (dir / r.image).string());
    }
    m.records.push_back(std::move(r));
  }
  if (checksum_string(h) != m.info.checksum) {
    throw ManifestError(ManifestErrorKind::kChecksumMismatch, "checksum mismatch in " + path.string());
  }
  if (m.records.size() != m.info.count) {
    throw ManifestError(ManifestErrorKind::kCountMismatch, "record count " + std::to_string(m.records.size()) +
                                                               " != declared " + std::to_string(m.info.count));
  }
  return m;
}

ManifestInfo read_manifest_info(const fs::path& path) {
  std::ifstream in = open_existing(path);
  std::string line;
  if (!std::getline(in, line)) throw ManifestError(ManifestErrorKind::kMalformed, "empty manifest: " + path.string());
  return parse_header(line, path);
}

std::string manifest_fingerprint(const fs::path& path) { return read_manifest_info(path).checksum; }

template ManifestInfo write_manifest(const fs::path&, const std::string&, std::uint64_t,
                                     const std::vector<LabeledSample>&);
template ManifestInfo write_manifest(const fs::path&, const std::string&, std::uint64_t,
                                     const std::vector<UnlabeledFrame>&);
template ManifestInfo write_manifest(const fs::path&, const std::string&, std::uint64_t,
                                     const std::vector<PseudoLabeledSample>&);
template Manifest<LabeledSample> read_manifest(const fs::path&, const ReadOptions&);
template Manifest<UnlabeledFrame> read_manifest(const fs::path&, const ReadOptions&);
template Manifest<PseudoLabeledSample> read_manifest(const fs::path&, const ReadOptions&);

}  // namespace selfd::core
