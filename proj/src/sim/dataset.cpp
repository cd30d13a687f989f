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

#include "selfd/sim/dataset.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "selfd/core/image_io.hpp"
#include "selfd/core/manifest.hpp"
#include "selfd/core/parallel.hpp"

namespace selfd::sim {
namespace fs = std::filesystem;

std::uint64_t family_seed(Family family, std::uint64_t master_seed, std::uint64_t index) {
  constexpr std::uint64_t kLow56 = (std::uint64_t{1} << 56) - 1;
  return (static_cast<std::uint64_t>(family) << 56) | (core::mix_seed(master_seed, index) & kLow56);
}

core::CameraSpec sample_camera(const core::CameraSpec& base, const CameraRandomization& r, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  core::CameraSpec c = base;
  c.height_m = r.height_min_m + (r.height_max_m - r.height_min_m) * u(rng);
  c.pitch_deg = r.pitch_min_deg + (r.pitch_max_deg - r.pitch_min_deg) * u(rng);
  c.hfov_deg = r.fov_min_deg + (r.fov_max_deg - r.fov_min_deg) * u(rng);
  return c;
}

namespace {

nlohmann::json split_json(const SplitSpec& s) {
  nlohmann::json apps = nlohmann::json::array();
  for (auto a : s.appearances) apps.push_back(std::string(appearance_name(a)));
  return {{"episodes", s.episodes}, {"randomize_camera", s.randomize_camera}, {"appearances", apps}};
}

void split_from_json(const nlohmann::json& j, SplitSpec& s) {
  s.episodes = j.value("episodes", s.episodes);
  s.randomize_camera = j.value("randomize_camera", s.randomize_camera);
  if (j.contains("appearances")) {
    s.appearances.clear();
    for (const auto& a : j.at("appearances")) s.appearances.push_back(appearance_from_name(a.get<std::string>()));
  }
}

}  // namespace

void to_json(nlohmann::json& j, const DatasetConfig& c) {
  const auto& r = c.camera_randomization;
  j = nlohmann::json{{"seed", c.seed},
                     {"world", c.world},
                     {"episode", c.episode},
                     {"expert", c.expert},
                     {"vehicle", c.vehicle},
                     {"render",
                      {{"supersample", c.render.supersample},
                       {"haze", c.render.haze},
                       {"haze_distance_m", c.render.haze_distance_m},
                       {"agent_height_m", c.render.agent_height_m}}},
                     {"camera", c.camera},
                     {"camera_randomization",
                      {{"height_min_m", r.height_min_m},
                       {"height_max_m", r.height_max_m},
                       {"pitch_min_deg", r.pitch_min_deg},
                       {"pitch_max_deg", r.pitch_max_deg},
                       {"fov_min_deg", r.fov_min_deg},
                       {"fov_max_deg", r.fov_max_deg}}},
                     {"labeled", split_json(c.labeled)},
                     {"unlabeled", split_json(c.unlabeled)},
                     {"eval", split_json(c.eval)},
                     {"threads", c.threads}};
}

void from_json(const nlohmann::json& j, DatasetConfig& c) {
  c.seed = j.value("seed", c.seed);
  if (j.contains("world")) c.world = j.at("world").get<WorldConfig>();
  if (j.contains("episode")) c.episode = j.at("episode").get<EpisodeConfig>();
  if (j.contains("expert")) c.expert = j.at("expert").get<ExpertConfig>();
  if (j.contains("vehicle")) c.vehicle = j.at("vehicle").get<VehicleParams>();
  if (j.contains("render")) {
    const auto& r = j.at("render");
    c.render.supersample = r.value("supersample", c.render.supersample);
    c.render.haze = r.value("haze", c.render.haze);
    c.render.haze_distance_m = r.value("haze_distance_m", c.render.haze_distance_m);
    c.render.agent_height_m = r.value("agent_height_m", c.render.agent_height_m);
  }
  if (j.contains("camera")) c.camera = j.at("camera").get<core::CameraSpec>();
  if (j.contains("camera_randomization")) {
    const auto& r = j.at("camera_randomization");
    auto& o = c.camera_randomization;
    o.height_min_m = r.value("height_min_m", o.height_min_m);
    o.height_max_m = r.value("height_max_m", o.height_max_m);
    o.pitch_min_deg = r.value("pitch_min_deg", o.pitch_min_deg);
    o.pitch_max_deg = r.value("pitch_max_deg", o.pitch_max_deg);
    o.fov_min_deg = r.value("fov_min_deg", o.fov_min_deg);
    o.fov_max_deg = r.value("fov_max_deg", o.fov_max_deg);
  }
  if (j.contains("labeled")) split_from_json(j.at("labeled"), c.labeled);
  if (j.contains("unlabeled")) split_from_json(j.at("unlabeled"), c.unlabeled);
  if (j.contains("eval")) split_from_json(j.at("eval"), c.eval);
  c.threads = j.value("threads", c.threads);
}

EpisodeSetup episode_setup(const DatasetConfig& c, Family family, const SplitSpec& split, int episode) {
  if (split.appearances.empty()) throw std::invalid_argument("split needs at least one appearance");
  EpisodeSetup s;
  s.world_seed = family_seed(family, c.seed, static_cast<std::uint64_t>(episode));
  std::mt19937_64 rng(core::mix_seed(s.world_seed, 0x5e7u));
  s.camera = split.randomize_camera ? sample_camera(c.camera, c.camera_randomization, rng) : c.camera;
  s.appearance = split.appearances[std::uniform_int_distribution<std::size_t>(0, split.appearances.size() - 1)(rng)];
  s.noise_seed = rng();
  return s;
}

namespace {

std::string episode_id(char family, int episode) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%05d", family, episode);
  return buf;
}

std::string image_name(const std::string& episode, int frame) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "images/%s_%03d.ppm", episode.c_str(), frame);
  return buf;
}

template <typename Record>
struct SplitResult {
  std::vector<std::vector<Record>> per_episode;
  nlohmann::json episodes = nlohmann::json::array();
  std::atomic<int> collisions{0};
};

// Renders every frame of every episode in a split and returns records grouped by episode.
template <typename Record, typename MakeRecord>
void run_split(const DatasetConfig& c, Family family, char tag, const SplitSpec& split, const fs::path& dir,
               SplitResult<Record>& result, MakeRecord make) {
  fs::create_directories(dir / "images");
  result.per_episode.assign(static_cast<std::size_t>(split.episodes), {});
  std::vector<nlohmann::json> meta(static_cast<std::size_t>(split.episodes));
  core::parallel_for(static_cast<std::size_t>(split.episodes), c.threads, [&](std::size_t e) {
    const int ep = static_cast<int>(e);
    const EpisodeSetup setup = episode_setup(c, family, split, ep);
    const World world = build_world(setup.world_seed, c.world);
    const EpisodeLog log = run_expert_episode(world, c.episode, c.expert, c.vehicle, setup.noise_seed);
    result.collisions += log.expert_collisions;
    const std::string id = episode_id(tag, ep);
    for (const auto& fr : log.frames) {
      const core::Image img = render(world, fr.ego.pose, fr.time, setup.camera, setup.appearance,
                                     core::mix_seed(setup.noise_seed, static_cast<std::uint64_t>(fr.index)), c.render);
      const std::string name = image_name(id, fr.index);
      core::write_ppm(dir / name, img);
      result.per_episode[e].push_back(make(world, fr, id, name));
    }
    meta[e] = {{"episode", id},
               {"world_seed", setup.world_seed},
               {"camera", setup.camera},
               {"appearance", std::string(appearance_name(setup.appearance))},
               {"frames", log.frames.size()},
               {"expert_collisions", log.expert_collisions}};
  });
  for (auto& m : meta) result.episodes.push_back(std::move(m));
}

template <typename Record>
std::vector<Record> flatten(std::vector<std::vector<Record>>& groups) {
  std::vector<Record> out;
  for (auto& g : groups) {
    for (auto& r : g) out.push_back(std::move(r));
  }
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace

GeneratedDataset generate_dataset(const DatasetConfig& config, const fs::path& out_dir) {
  config.world.validate();
  if (!config.camera.valid()) throw std::invalid_argument("invalid labeled camera");
  GeneratedDataset out;
  fs::create_directories(out_dir);

  auto labeled_record = [&](const World& world, const EpisodeFrame& fr, const std::string& id, const std::string& name) {
    core::LabeledSample s;
    s.image = name;
    s.speed = fr.ego.speed;
    s.command = fr.expert.command;
    s.target = fr.expert.plan;
    s.episode_id = id;
    s.frame_index = fr.index;
    s.nearby_agents = nearby_agent_futures(world, fr.ego.pose, fr.time, config.expert);
    return s;
  };
  auto unlabeled_record = [](const World&, const EpisodeFrame& fr, const std::string& id, const std::string& name) {
    return core::UnlabeledFrame{name, id, fr.index};
  };

  {
    SplitResult<core::LabeledSample> r;
    run_split(config, Family::kLabeled, 'A', config.labeled, out_dir / "labeled", r, labeled_record);
    const auto records = flatten(r.per_episode);
    out.labeled = out_dir / "labeled" / "manifest.jsonl";
    core::write_manifest(out.labeled, "labeled", config.seed, records);
    write_json(out_dir / "labeled" / "episodes.json", r.episodes);
    out.labeled_frames = records.size();
    out.expert_collisions += r.collisions;
  }
  {
    SplitResult<core::UnlabeledFrame> r;
    run_split(config, Family::kUnlabeled, 'B', config.unlabeled, out_dir / "unlabeled", r, unlabeled_record);
    const auto records = flatten(r.per_episode);
    out.unlabeled = out_dir / "unlabeled" / "manifest.jsonl";
    core::write_manifest(out.unlabeled, "unlabeled", config.seed, records);
    write_json(out_dir / "unlabeled" / "episodes.json", r.episodes);
    out.unlabeled_frames = records.size();
    out.expert_collisions += r.collisions;
  }
  {
    SplitResult<core::LabeledSample> r;
    run_split(config, Family::kEval, 'C', config.eval, out_dir / "eval", r, labeled_record);
    const auto records = flatten(r.per_episode);
    out.eval = out_dir / "eval" / "manifest.jsonl";
    core::write_manifest(out.eval, "eval", config.seed, records);
    write_json(out_dir / "eval" / "episodes.json", r.episodes);
    out.eval_frames = records.size();
    out.expert_collisions += r.collisions;
  }
  nlohmann::json cfg = config;
  write_json(out_dir / "dataset_config.json", cfg);
  return out;
}

}  // namespace selfd::sim
