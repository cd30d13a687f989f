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

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "selfd/core/camera.hpp"
#include "selfd/core/image_io.hpp"
#include "selfd/core/manifest.hpp"
#include "selfd/core/validation.hpp"
#include "test_support.hpp"

using namespace selfd;
using namespace selfd::core;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void dump(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

LabeledSample labeled(std::mt19937_64& rng, int i) {
  LabeledSample s;
  s.image = "img/" + std::to_string(i) + ".ppm";
  std::uniform_real_distribution<double> sp(0.0, 12.0);
  s.speed = sp(rng);
  s.command = kAllCommands[i % 3];
  s.target = testing::random_plan(5, rng);
  s.episode_id = "ep" + std::to_string(i / 10);
  s.frame_index = i % 10;
  if (i % 4 == 0) {
    AgentTrack a;
    for (int k = 0; k < 5; ++k) a.future.push_back({1.0 * k + 0.1 * i, -3.5, 0.01 * k});
    s.nearby_agents = std::vector<AgentTrack>{a};
  } else if (i % 4 == 1) {
    s.nearby_agents = std::vector<AgentTrack>{};
  }
  return s;
}

}  // namespace

TEST_CASE("command codes are stable") {
  CHECK(command_code(Command::kLeft) == 1);
  CHECK(command_code(Command::kForward) == 2);
  CHECK(command_code(Command::kRight) == 3);
  CHECK(command_from_code(3) == Command::kRight);
  CHECK_THROWS(command_from_code(0));
  CHECK_THROWS(command_from_code(4));
}

TEST_CASE("validation: well-formed samples pass") {
  std::mt19937_64 rng(1);
  const ValidationContext ctx;
  const auto s = labeled(rng, 3);
  CHECK(validate_sample(s, ctx).ok());
}

TEST_CASE("validation: each invariant is reported by name") {
  std::mt19937_64 rng(1);
  const ValidationContext ctx;
  const auto good = labeled(rng, 2);

  auto s = good;
  s.target.waypoints.pop_back();
  CHECK(validate_sample(s, ctx).violation == "waypoint-count");

  s = good;
  s.target.waypoints[2].y = std::numeric_limits<double>::quiet_NaN();
  CHECK(validate_sample(s, ctx).violation == "non-finite");

  s = good;
  s.target.waypoints[0].x = std::numeric_limits<double>::infinity();
  CHECK(validate_sample(s, ctx).violation == "non-finite");

  s = good;
  s.speed = -0.01;
  CHECK(validate_sample(s, ctx).violation == "speed-negative");

  s = good;
  s.command = static_cast<Command>(7);
  CHECK(validate_sample(s, ctx).violation == "command-code");

  s = good;
  s.image.clear();
  CHECK(validate_sample(s, ctx).violation == "image-ref");

  s = good;
  s.target.quality = 0.5;
  CHECK(validate_sample(s, ctx).violation == "ground-truth-quality");

  PseudoLabeledSample p;
  p.image = "a.ppm";
  p.sampled_speed = 5.0;
  p.pseudo_plan = testing::random_plan(5, rng);
  p.pseudo_plan.quality = 0.4;
  CHECK(validate_sample(p, ctx).ok());
  p.pseudo_plan.quality = 1.5;
  CHECK(validate_sample(p, ctx).violation == "quality-range");
  p.pseudo_plan.quality = -0.1;
  CHECK(validate_sample(p, ctx).violation == "quality-range");
  p.pseudo_plan.quality = 0.4;
  p.sampled_speed = ctx.speed_hi + 1.0;
  CHECK(validate_sample(p, ctx).violation == "speed-range");
}

TEST_CASE("manifest: empty round trip") {
  const auto dir = testing::scratch_dir("manifest_empty");
  const std::vector<UnlabeledFrame> none;
  const auto info = write_manifest(dir / "m.jsonl", "unlabeled", 4, none);
  CHECK(info.count == 0);
  const auto back = read_manifest<UnlabeledFrame>(dir / "m.jsonl");
  CHECK(back.records.empty());
  CHECK(back.info.seed == 4);
  CHECK(back.info.kind == "unlabeled");
}

TEST_CASE("manifest: 100 labeled records round trip and re-serialize byte-identically") {
  const auto dir = testing::scratch_dir("manifest_100");
  std::mt19937_64 rng(42);
  std::vector<LabeledSample> recs;
  for (int i = 0; i < 100; ++i) recs.push_back(labeled(rng, i));
  write_manifest(dir / "a.jsonl", "train", 9, recs);
  const auto back = read_manifest<LabeledSample>(dir / "a.jsonl", {.verify_images = false});
  REQUIRE(back.records.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) REQUIRE(back.records[i] == recs[i]);
  write_manifest(dir / "b.jsonl", "train", 9, back.records);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK(manifest_fingerprint(dir / "a.jsonl") == back.info.checksum);
}

TEST_CASE("manifest: pseudo records keep provenance fields") {
  const auto dir = testing::scratch_dir("manifest_pseudo");
  std::mt19937_64 rng(3);
  std::vector<PseudoLabeledSample> recs;
  for (int i = 0; i < 12; ++i) {
    PseudoLabeledSample p;
    p.image = "u/" + std::to_string(i) + ".ppm";
    p.sampled_speed = 0.37 * i;
    p.sampled_command = kAllCommands[i % 3];
    p.pseudo_plan = testing::random_plan(5, rng);
    p.pseudo_plan.quality = 0.1 + 0.05 * i;
    p.teacher_id = "00ff00ff00ff00ff";
    p.sampling_strategy = i % 2 ? SamplingKind::kPrior : SamplingKind::kUniform;
    p.episode_id = "u" + std::to_string(i / 4);
    p.frame_index = i;
    recs.push_back(p);
  }
  write_manifest(dir / "p.jsonl", "pseudo", 1, recs);
  const auto back = read_manifest<PseudoLabeledSample>(dir / "p.jsonl", {.verify_images = false});
  CHECK(back.records == recs);
}

TEST_CASE("manifest: typed errors") {
  const auto dir = testing::scratch_dir("manifest_err");
  std::mt19937_64 rng(5);
  std::vector<LabeledSample> recs;
  for (int i = 0; i < 5; ++i) recs.push_back(labeled(rng, i));
  write_manifest(dir / "m.jsonl", "train", 1, recs);
  const std::string text = slurp(dir / "m.jsonl");

  auto kind_of = [&](const std::filesystem::path& p, ReadOptions opt = {.verify_images = false}) {
    try {
      read_manifest<LabeledSample>(p, opt);
    } catch (const ManifestError& e) {
      return e.kind();
    }
    FAIL("no error raised");
    return ManifestErrorKind::kIo;
  };

  CHECK(kind_of(dir / "missing.jsonl") == ManifestErrorKind::kMissingFile);

  std::string bumped = text;
  bumped.replace(bumped.find("selfd-manifest 1"), 16, "selfd-manifest 2");
  dump(dir / "v.jsonl", bumped);
  CHECK(kind_of(dir / "v.jsonl") == ManifestErrorKind::kVersionMismatch);

  std::string tampered = text;
  const auto pos = tampered.find("\"episode\":\"ep0\"");
  REQUIRE(pos != std::string::npos);
  tampered.replace(pos, 15, "\"episode\":\"epX\"");
  dump(dir / "c.jsonl", tampered);
  CHECK(kind_of(dir / "c.jsonl") == ManifestErrorKind::kChecksumMismatch);

  CHECK(kind_of(dir / "m.jsonl", {.verify_images = true}) == ManifestErrorKind::kMissingImage);

  CHECK_THROWS_AS(read_manifest<UnlabeledFrame>(dir / "m.jsonl", {.verify_images = false}), ManifestError);
}

TEST_CASE("ppm round trip is lossless on the 8-bit grid") {
  const auto dir = testing::scratch_dir("ppm");
  std::mt19937_64 rng(8);
  const auto img = testing::random_image(13, 7, rng);
  write_ppm(dir / "x.ppm", img);
  CHECK(read_ppm(dir / "x.ppm") == img);
  CHECK(to_float(read_ppm_bytes(dir / "x.ppm")) == img);
}

TEST_CASE("geometry: frame conversions invert each other") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-50, 50), a(-4, 4);
  for (int i = 0; i < 200; ++i) {
    const Pose2 ego{u(rng), u(rng), a(rng)};
    const Vec2 p{u(rng), u(rng)};
    const Vec2 q = ego_to_world(ego, world_to_ego(ego, p));
    REQUIRE(std::abs(q.x - p.x) < 1e-9);
    REQUIRE(std::abs(q.y - p.y) < 1e-9);
    const double w = wrap_angle(a(rng) * 3);
    REQUIRE(w > -std::numbers::pi);
    REQUIRE(w <= std::numbers::pi);
  }
}

TEST_CASE("geometry: rectangle containment and overlap") {
  const OrientedRect r{{0, 0, 0}, 2.0, 1.0};
  CHECK(contains(r, {2.0, 1.0}));
  CHECK_FALSE(contains(r, {2.01, 0.0}));
  CHECK(contains(r, {2.5, 0.0}, 0.5));
  const OrientedRect rot{{0, 0, std::numbers::pi / 2}, 2.0, 1.0};
  CHECK(contains(rot, {0.0, 1.9}));
  CHECK_FALSE(contains(rot, {1.9, 0.0}));

  CHECK(overlaps(r, {{3.5, 0, 0}, 2.0, 1.0}));
  CHECK_FALSE(overlaps(r, {{4.5, 0, 0}, 2.0, 1.0}));
  // Diagonal case where axis-aligned bounds overlap but the shapes do not.
  CHECK_FALSE(overlaps({{0, 0, std::numbers::pi / 4}, 2.0, 0.2}, {{1.6, -1.6, std::numbers::pi / 4}, 2.0, 0.2}));
  CHECK(point_segment_distance({0, 1}, {-1, 0}, {1, 0}) == doctest::Approx(1.0));
  CHECK(point_segment_distance({3, 0}, {-1, 0}, {1, 0}) == doctest::Approx(2.0));
}

TEST_CASE("camera: ground projection and back-projection agree") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> h(1.2, 2.2), pitch(-8, 8), fov(50, 90), x(3, 40), y(-8, 8);
  for (int i = 0; i < 300; ++i) {
    CameraSpec cam{h(rng), pitch(rng), fov(rng), 64, 32};
    REQUIRE(cam.valid());
    const Vec2 g{x(rng), y(rng)};
    const auto px = cam.project_ground(g);
    REQUIRE(px.has_value());
    REQUIRE(px->y > cam.horizon_row());
    const auto back = cam.ground_from_pixel(*px);
    REQUIRE(back.has_value());
    REQUIRE(std::abs(back->x - g.x) < 1e-6);
    REQUIRE(std::abs(back->y - g.y) < 1e-6);
  }
  const CameraSpec level;
  CHECK(level.horizon_row() == doctest::Approx(level.cy()));
  CHECK_FALSE(level.ground_from_pixel({10.0, level.horizon_row() - 1.0}).has_value());
  // Left of the ego appears on the left half of the image.
  CHECK(level.project_ground({10.0, 2.0})->x < level.cx());
}

TEST_CASE("hashing helpers") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
}
