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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "selfd/core/image_io.hpp"
#include "selfd/core/manifest.hpp"
#include "selfd/core/validation.hpp"
#include "selfd/planner/checkpoint.hpp"
#include "selfd/pseudo/what_if.hpp"
#include "test_support.hpp"

using namespace selfd;
using core::Command;
using core::SamplingKind;
using pseudo::SamplingStrategy;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Kolmogorov-Smirnov statistic of samples against a CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double chi_square_uniform3(const std::array<double, 3>& counts) {
  const double total = counts[0] + counts[1] + counts[2], e = total / 3.0;
  double chi = 0.0;
  for (double c : counts) chi += (c - e) * (c - e) / e;
  return chi;
}

constexpr double kChiSquare2Dof1Pct = 9.2103;

planner::Planner small_teacher(std::uint64_t seed = 4) {
  auto c = testing::tiny_config();
  c.dropout = 0.1;
  return planner::Planner(c, seed);
}

// An unlabeled manifest of random images at the tiny planner resolution.
std::filesystem::path make_unlabeled(const std::filesystem::path& dir, int frames) {
  std::filesystem::create_directories(dir / "images");
  std::mt19937_64 rng(11);
  std::vector<core::UnlabeledFrame> recs;
  for (int i = 0; i < frames; ++i) {
    const std::string name = "images/f" + std::to_string(i) + ".ppm";
    core::write_ppm(dir / name, testing::random_image(16, 8, rng));
    recs.push_back({name, "B0000" + std::to_string(i / 4), i % 4});
  }
  core::write_manifest(dir / "manifest.jsonl", "unlabeled", 1, recs);
  return dir / "manifest.jsonl";
}

}  // namespace

TEST_CASE("uniform draws: command frequencies and speed distribution") {
  SamplingStrategy s;
  s.speed_lo = 1.0;
  s.speed_hi = 11.0;
  std::mt19937_64 rng(2024);
  std::array<double, 3> counts{};
  std::vector<double> speeds;
  const int n = 30000;
  for (int i = 0; i < n; ++i) {
    const auto d = pseudo::sample_input(s, rng);
    counts[static_cast<std::size_t>(core::command_index(d.command))] += 1.0;
    speeds.push_back(d.speed);
    REQUIRE(d.speed >= s.speed_lo);
    REQUIRE(d.speed <= s.speed_hi);
  }
  for (double c : counts) CHECK(std::abs(c / n - 1.0 / 3.0) < 0.01);
  CHECK(chi_square_uniform3(counts) < kChiSquare2Dof1Pct);
  const double d = ks_statistic(speeds, [&](double v) { return (v - s.speed_lo) / (s.speed_hi - s.speed_lo); });
  CHECK(d < 1.63 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("uniform frame draws are stratified over commands") {
  std::mt19937_64 rng(3);
  for (int n : {0, 1, 3, 4, 6, 8, 9}) {
    SamplingStrategy s;
    s.samples_per_frame = n;
    for (int rep = 0; rep < 50; ++rep) {
      const auto draws = pseudo::sample_frame_inputs(s, rng);
      REQUIRE(static_cast<int>(draws.size()) == n);
      for (Command c : core::kAllCommands) {
        const auto k = std::count_if(draws.begin(), draws.end(), [&](const auto& d) { return d.command == c; });
        CHECK(k >= n / 3);
        CHECK(k <= n / 3 + (n % 3 ? 1 : 0) + (n % 3 == 2 ? 1 : 0));
      }
    }
  }
  // The remainder still passes the chi-square test over many frames.
  SamplingStrategy s;
  s.samples_per_frame = 4;
  std::array<double, 3> counts{};
  for (int f = 0; f < 5000; ++f) {
    for (const auto& d : pseudo::sample_frame_inputs(s, rng)) counts[core::command_index(d.command)] += 1.0;
  }
  CHECK(chi_square_uniform3(counts) < kChiSquare2Dof1Pct);
}

TEST_CASE("prior draws follow the command weights and the speed histogram") {
  SamplingStrategy s;
  s.kind = SamplingKind::kPrior;
  s.command_weights = {1.0, 0.0, 0.0};
  s.speed_histogram = pseudo::SpeedHistogram{0.0, 10.0, {1.0, 0.0, 3.0, 0.0, 6.0}};
  std::mt19937_64 rng(8);
  std::vector<double> speeds;
  for (int i = 0; i < 20000; ++i) {
    const auto d = pseudo::sample_input(s, rng);
    CHECK(d.command == Command::kLeft);
    speeds.push_back(d.speed);
  }
  // Piecewise-linear CDF of the histogram, written out by hand.
  auto cdf = [](double v) {
    if (v < 2.0) return 0.1 * v / 2.0;
    if (v < 4.0) return 0.1;
    if (v < 6.0) return 0.1 + 0.3 * (v - 4.0) / 2.0;
    if (v < 8.0) return 0.4;
    return std::min(1.0, 0.4 + 0.6 * (v - 8.0) / 2.0);
  };
  CHECK(ks_statistic(speeds, cdf) < 1.63 / std::sqrt(20000.0));
  for (double v : speeds) CHECK_FALSE((v > 2.0 + 1e-12 && v < 4.0 - 1e-12));

  s.command_weights = {0.2, 0.5, 0.3};
  std::array<double, 3> counts{};
  for (int i = 0; i < 30000; ++i) counts[core::command_index(pseudo::sample_input(s, rng).command)] += 1.0;
  CHECK(counts[0] / 30000 == doctest::Approx(0.2).epsilon(0.05));
  CHECK(counts[1] / 30000 == doctest::Approx(0.5).epsilon(0.05));
  CHECK(counts[2] / 30000 == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("histogram quantile and construction") {
  const pseudo::SpeedHistogram h{2.0, 6.0, {1.0, 1.0, 2.0, 0.0}};
  CHECK(h.quantile(0.0) == doctest::Approx(2.0));
  CHECK(h.quantile(0.25) == doctest::Approx(3.0));
  CHECK(h.quantile(0.5) == doctest::Approx(4.0));
  CHECK(h.quantile(0.75) == doctest::Approx(4.5));
  CHECK(h.quantile(1.0) == doctest::Approx(5.0));
  CHECK_THROWS_AS(pseudo::SpeedHistogram{}.quantile(0.3), std::invalid_argument);

  const auto built = pseudo::SpeedHistogram::from_speeds({0.0, 1.0, 1.0, 4.0}, 4);
  CHECK(built.lo == 0.0);
  CHECK(built.hi == 4.0);
  CHECK(built.counts == std::vector<double>{1.0, 2.0, 0.0, 1.0});
}

TEST_CASE("prior and fixed strategies from labeled data") {
  std::vector<core::LabeledSample> lab(4);
  lab[0].speed = 2.0;
  lab[1].speed = 4.0;
  lab[2].speed = 6.0;
  lab[3].speed = 8.0;
  lab[0].command = Command::kLeft;
  const auto prior = pseudo::prior_from_labeled(lab);
  CHECK(prior.command_weights[0] == doctest::Approx(0.25));
  CHECK(prior.command_weights[1] == doctest::Approx(0.75));
  CHECK(prior.speed_histogram->counts.size() == 20u);
  CHECK_NOTHROW(prior.validate());
  const auto fixed = pseudo::fixed_from_labeled(lab);
  CHECK(fixed.fixed_speed == doctest::Approx(5.0));
  CHECK(fixed.samples_per_frame == 1);
  std::mt19937_64 rng(1);
  for (const auto& d : pseudo::sample_frame_inputs(fixed, rng)) CHECK(d == pseudo::WhatIfInput{5.0, Command::kForward});
  CHECK_THROWS_AS(pseudo::prior_from_labeled({}), std::invalid_argument);
}

TEST_CASE("strategy validation and json round trip") {
  SamplingStrategy s;
  s.speed_hi = s.speed_lo;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = {};
  s.kind = SamplingKind::kPrior;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);  // no histogram
  s.speed_histogram = pseudo::SpeedHistogram{0.0, 4.0, {1.0, 2.0}};
  s.command_weights = {0.5, 0.6, 0.0};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.command_weights = {0.5, 0.25, 0.25};
  CHECK_NOTHROW(s.validate());
  const nlohmann::json j = s;
  const auto back = j.get<SamplingStrategy>();
  CHECK(back.kind == s.kind);
  CHECK(back.command_weights == s.command_weights);
  CHECK(back.speed_histogram->counts == s.speed_histogram->counts);
}

TEST_CASE("replaying an rng state replays the draws") {
  SamplingStrategy s;
  std::mt19937_64 a(99), b(99);
  for (int i = 0; i < 100; ++i) CHECK(pseudo::sample_frame_inputs(s, a) == pseudo::sample_frame_inputs(s, b));
}

TEST_CASE("what-if labels equal direct teacher inference") {
  const auto teacher = small_teacher();
  const std::string id = planner::model_id(teacher);
  std::mt19937_64 img_rng(5);
  const auto image = testing::random_image(16, 8, img_rng);
  const pseudo::FrameRef ref{"images/x.ppm", "B00001", 7};

  SamplingStrategy s;
  s.samples_per_frame = 0;
  std::mt19937_64 rng(1);
  CHECK(pseudo::what_if_labels(teacher, id, image, ref, s, rng).empty());

  s.samples_per_frame = 9;
  const auto recs = pseudo::what_if_labels(teacher, id, image, ref, s, rng);
  REQUIRE(recs.size() == 9u);
  std::set<Command> seen;
  core::ValidationContext ctx;
  ctx.num_waypoints = 3;
  for (const auto& r : recs) {
    const auto direct = teacher.forward({image, r.sampled_speed, r.sampled_command});
    CHECK(direct == r.pseudo_plan);
    CHECK(r.teacher_id == id);
    CHECK(r.image == ref.image);
    CHECK(r.frame_index == 7);
    CHECK(r.sampling_strategy == SamplingKind::kUniform);
    CHECK(core::validate_sample(r, ctx).ok());
    seen.insert(r.sampled_command);
  }
  CHECK(seen.size() == 3u);

  // Same rng state on another frame: same inputs, different plans.
  const auto image2 = testing::random_image(16, 8, img_rng);
  std::mt19937_64 r1(42), r2(42);
  const auto a = pseudo::what_if_labels(teacher, id, image, ref, s, r1);
  const auto b = pseudo::what_if_labels(teacher, id, image2, ref, s, r2);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].sampled_speed == b[i].sampled_speed);
    CHECK(a[i].sampled_command == b[i].sampled_command);
    differs = differs || !(a[i].pseudo_plan == b[i].pseudo_plan);
  }
  CHECK(differs);

  std::mt19937_64 bad_rng(1);
  CHECK_THROWS(pseudo::what_if_labels(teacher, id, testing::random_image(20, 8, bad_rng), ref, s, rng));
}

TEST_CASE("quality filter is an order-preserving partition") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<core::PseudoLabeledSample> recs(200);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    recs[i].frame_index = static_cast<int>(i);
    recs[i].pseudo_plan.quality = i % 17 == 0 ? 1.0 : u(rng);
  }
  CHECK(pseudo::filter_by_quality(recs, 0.0).kept.size() == recs.size());
  const auto top = pseudo::filter_by_quality(recs, 1.0);
  for (const auto& r : top.kept) CHECK(r.pseudo_plan.quality == 1.0);
  CHECK(top.kept.size() == 12u);

  const auto half = pseudo::filter_by_quality(recs, 0.5);
  std::vector<core::PseudoLabeledSample> exp_kept, exp_dropped;
  for (const auto& r : recs) (r.pseudo_plan.quality >= 0.5 ? exp_kept : exp_dropped).push_back(r);
  CHECK(half.kept == exp_kept);
  CHECK(half.dropped == exp_dropped);
  CHECK(half.kept.size() + half.dropped.size() == recs.size());
  CHECK_THROWS_AS(pseudo::filter_by_quality(recs, 1.01), std::invalid_argument);
  CHECK_THROWS_AS(pseudo::filter_by_quality(recs, -0.1), std::invalid_argument);
}

TEST_CASE("pseudo dataset: counts, reproducibility, fidelity") {
  const auto dir = testing::scratch_dir("pseudo");
  const auto unl = make_unlabeled(dir / "unlabeled", 10);
  const auto teacher = small_teacher();
  SamplingStrategy s;
  s.samples_per_frame = 3;

  const auto a = pseudo::build_pseudo_dataset(unl, teacher, s, 0.0, 17, dir / "p1" / "manifest.jsonl");
  CHECK(a.frames == 10u);
  CHECK(a.generated == 30u);
  CHECK(a.kept == 30u);
  CHECK(a.info.count == 30u);
  const auto b = pseudo::build_pseudo_dataset(unl, teacher, s, 0.0, 17, dir / "p2" / "manifest.jsonl", 3);
  CHECK(slurp(dir / "p1" / "manifest.jsonl") == slurp(dir / "p2" / "manifest.jsonl"));

  const auto m = core::read_manifest<core::PseudoLabeledSample>(dir / "p1" / "manifest.jsonl");
  REQUIRE(m.records.size() == 30u);
  for (const auto& r : m.records) CHECK(r.teacher_id == planner::model_id(teacher));
  CHECK(pseudo::count_fidelity_mismatches(dir / "p1" / "manifest.jsonl", teacher) == 0u);
  // Another model does not reproduce the labels.
  CHECK(pseudo::count_fidelity_mismatches(dir / "p1" / "manifest.jsonl", small_teacher(5)) == 30u);

  // Median threshold keeps the upper half (ties kept).
  for (int frames : {10, 9}) {
    const auto src = make_unlabeled(dir / ("u" + std::to_string(frames)), frames);
    const auto all = pseudo::build_pseudo_dataset(src, teacher, s, 0.0, 3, dir / "all" / "manifest.jsonl");
    std::vector<double> q;
    for (const auto& r : core::read_manifest<core::PseudoLabeledSample>(dir / "all" / "manifest.jsonl").records) {
      q.push_back(r.pseudo_plan.quality);
    }
    std::sort(q.begin(), q.end());
    const double median = q[q.size() / 2];
    const auto expected = static_cast<std::size_t>(std::count_if(q.begin(), q.end(), [&](double v) { return v >= median; }));
    const auto kept = pseudo::build_pseudo_dataset(src, teacher, s, median, 3, dir / "med" / "manifest.jsonl");
    CHECK(kept.generated == q.size());
    CHECK(kept.kept == expected);
    CHECK(kept.kept >= (q.size() + 1) / 2);
  }
}
