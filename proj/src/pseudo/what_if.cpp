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

#include "selfd/pseudo/what_if.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "selfd/core/image_io.hpp"
#include "selfd/core/parallel.hpp"
#include "selfd/planner/checkpoint.hpp"

namespace selfd::pseudo {
namespace fs = std::filesystem;

SpeedHistogram SpeedHistogram::from_speeds(const std::vector<double>& speeds, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  SpeedHistogram h;
  if (speeds.empty()) return h;
  const auto [mn, mx] = std::minmax_element(speeds.begin(), speeds.end());
  h.lo = *mn;
  h.hi = *mx;
  if (h.hi - h.lo < 1e-6) {
    h.lo = std::max(0.0, h.lo - 0.5);
    h.hi = h.lo + 1.0;
  }
  h.counts.assign(static_cast<std::size_t>(bins), 0.0);
  const double width = (h.hi - h.lo) / bins;
  for (double v : speeds) {
    const int b = std::clamp(static_cast<int>((v - h.lo) / width), 0, bins - 1);
    h.counts[static_cast<std::size_t>(b)] += 1.0;
  }
  return h;
}

double SpeedHistogram::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

double SpeedHistogram::quantile(double u) const {
  const double tot = total();
  if (counts.empty() || !(tot > 0.0)) throw std::invalid_argument("empty speed histogram");
  const double width = (hi - lo) / static_cast<double>(counts.size());
  double target = std::clamp(u, 0.0, 1.0) * tot;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    if (counts[b] <= 0.0) continue;
    if (target < counts[b] || b + 1 == counts.size()) {
      const double frac = std::min(target / counts[b], 1.0);
      return lo + (static_cast<double>(b) + frac) * width;
    }
    target -= counts[b];
  }
  // Trailing empty bins: the top of the last populated bin.
  for (std::size_t b = counts.size(); b-- > 0;) {
    if (counts[b] > 0.0) return lo + static_cast<double>(b + 1) * width;
  }
  return hi;
}

void SamplingStrategy::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid sampling strategy: ") + what);
  };
  require(speed_lo >= 0.0 && speed_hi > speed_lo, "speed range must satisfy 0 <= lo < hi");
  require(samples_per_frame >= 0, "samples per frame must be non-negative");
  if (kind == core::SamplingKind::kPrior) {
    double sum = 0.0;
    for (double w : command_weights) {
      require(w >= 0.0 && std::isfinite(w), "command weights must be non-negative");
      sum += w;
    }
    require(std::abs(sum - 1.0) < 1e-9, "command weights must sum to 1");
    require(speed_histogram.has_value() && speed_histogram->total() > 0.0, "empty speed histogram");
  }
  if (kind == core::SamplingKind::kFixed) {
    require(fixed_speed >= speed_lo && fixed_speed <= speed_hi, "fixed speed outside the speed range");
  }
}

void to_json(nlohmann::json& j, const SamplingStrategy& s) {
  j = nlohmann::json{{"kind", std::string(core::sampling_kind_name(s.kind))},
                     {"speed_lo", s.speed_lo},
                     {"speed_hi", s.speed_hi},
                     {"command_weights", s.command_weights},
                     {"samples_per_frame", s.samples_per_frame},
                     {"fixed_speed", s.fixed_speed},
                     {"fixed_command", core::command_code(s.fixed_command)}};
  if (s.speed_histogram) {
    j["speed_histogram"] = {{"lo", s.speed_histogram->lo},
                            {"hi", s.speed_histogram->hi},
                            {"counts", s.speed_histogram->counts}};
  }
}

void from_json(const nlohmann::json& j, SamplingStrategy& s) {
  if (j.contains("kind")) s.kind = core::sampling_kind_from_name(j.at("kind").get<std::string>());
  s.speed_lo = j.value("speed_lo", s.speed_lo);
  s.speed_hi = j.value("speed_hi", s.speed_hi);
  if (j.contains("command_weights")) s.command_weights = j.at("command_weights").get<std::array<double, 3>>();
  s.samples_per_frame = j.value("samples_per_frame", s.samples_per_frame);
  s.fixed_speed = j.value("fixed_speed", s.fixed_speed);
  if (j.contains("fixed_command")) s.fixed_command = core::command_from_code(j.at("fixed_command").get<int>());
  if (j.contains("speed_histogram")) {
    const auto& h = j.at("speed_histogram");
    SpeedHistogram hist;
    hist.lo = h.at("lo").get<double>();
    hist.hi = h.at("hi").get<double>();
    hist.counts = h.at("counts").get<std::vector<double>>();
    s.speed_histogram = std::move(hist);
  }
}

SamplingStrategy prior_from_labeled(const std::vector<core::LabeledSample>& labeled, int samples_per_frame,
                                    int bins) {
  if (labeled.empty()) throw std::invalid_argument("empty speed histogram: no labeled samples");
  SamplingStrategy s;
  s.kind = core::SamplingKind::kPrior;
  s.samples_per_frame = samples_per_frame;
  std::vector<double> speeds;
  std::array<double, 3> counts{0.0, 0.0, 0.0};
  for (const auto& r : labeled) {
    speeds.push_back(r.speed);
    counts[static_cast<std::size_t>(core::command_index(r.command))] += 1.0;
  }
  for (int c = 0; c < 3; ++c) s.command_weights[c] = counts[c] / static_cast<double>(labeled.size());
  s.speed_histogram = SpeedHistogram::from_speeds(speeds, bins);
  s.speed_lo = s.speed_histogram->lo;
  s.speed_hi = s.speed_histogram->hi;
  return s;
}

SamplingStrategy fixed_from_labeled(const std::vector<core::LabeledSample>& labeled) {
  if (labeled.empty()) throw std::invalid_argument("no labeled samples");
  SamplingStrategy s;
  s.kind = core::SamplingKind::kFixed;
  s.samples_per_frame = 1;
  double sum = 0.0;
  for (const auto& r : labeled) sum += r.speed;
  s.fixed_speed = std::clamp(sum / static_cast<double>(labeled.size()), s.speed_lo, s.speed_hi);
  s.fixed_command = core::Command::kForward;
  return s;
}

namespace {

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

core::Command uniform_command(std::mt19937_64& rng) {
  return core::command_from_code(std::uniform_int_distribution<int>(1, 3)(rng));
}

core::Command weighted_command(const std::array<double, 3>& w, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (int c = 0; c < 3; ++c) {
    acc += w[c];
    if (u < acc) return core::kAllCommands[c];
  }
  // u lands in rounding slack: the last command with positive weight.
  for (int c = 2; c >= 0; --c) {
    if (w[c] > 0.0) return core::kAllCommands[c];
  }
  return core::Command::kForward;
}

double draw_speed(const SamplingStrategy& s, std::mt19937_64& rng) {
  if (s.kind == core::SamplingKind::kPrior) return s.speed_histogram->quantile(uniform01(rng));
  return s.speed_lo + (s.speed_hi - s.speed_lo) * uniform01(rng);
}

}  // namespace

WhatIfInput sample_input(const SamplingStrategy& s, std::mt19937_64& rng) {
  s.validate();
  switch (s.kind) {
    case core::SamplingKind::kUniform: {
      const core::Command c = uniform_command(rng);
      return {draw_speed(s, rng), c};
    }
    case core::SamplingKind::kPrior: {
      const core::Command c = weighted_command(s.command_weights, rng);
      return {draw_speed(s, rng), c};
    }
    case core::SamplingKind::kFixed: return {s.fixed_speed, s.fixed_command};
  }
  return {};
}

std::vector<WhatIfInput> sample_frame_inputs(const SamplingStrategy& s, std::mt19937_64& rng) {
  s.validate();
  const int n = s.samples_per_frame;
  std::vector<WhatIfInput> out;
  out.reserve(static_cast<std::size_t>(n));
  if (s.kind != core::SamplingKind::kUniform) {
    for (int i = 0; i < n; ++i) out.push_back(sample_input(s, rng));
    return out;
  }
  std::vector<core::Command> commands;
  for (int i = 0; i < n / 3; ++i) commands.insert(commands.end(), std::begin(core::kAllCommands), std::end(core::kAllCommands));
  while (static_cast<int>(commands.size()) < n) commands.push_back(uniform_command(rng));
  std::shuffle(commands.begin(), commands.end(), rng);
  for (core::Command c : commands) out.push_back({draw_speed(s, rng), c});
  return out;
}

std::vector<core::PseudoLabeledSample> what_if_labels(const planner::Planner& teacher, const std::string& teacher_id,
                                                      const core::Image& image, const FrameRef& ref,
                                                      const SamplingStrategy& s, std::mt19937_64& rng) {
  const auto inputs = sample_frame_inputs(s, rng);
  std::vector<core::PseudoLabeledSample> out;
  if (inputs.empty()) return out;
  const auto features = teacher.encode(image);
  out.reserve(inputs.size());
  for (const auto& in : inputs) {
    core::PseudoLabeledSample r;
    r.image = ref.image;
    r.sampled_speed = in.speed;
    r.sampled_command = in.command;
    r.pseudo_plan = teacher.decode(features, in.speed, in.command);
    r.teacher_id = teacher_id;
    r.sampling_strategy = s.kind;
    r.episode_id = ref.episode_id;
    r.frame_index = ref.frame_index;
    out.push_back(std::move(r));
  }
  return out;
}

FilterResult filter_by_quality(const std::vector<core::PseudoLabeledSample>& records, double sigma_min) {
  if (!(sigma_min >= 0.0 && sigma_min <= 1.0)) throw std::invalid_argument("sigma_min must lie in [0, 1]");
  FilterResult out;
  for (const auto& r : records) (r.pseudo_plan.quality >= sigma_min ? out.kept : out.dropped).push_back(r);
  return out;
}

PseudoDatasetResult build_pseudo_dataset(const fs::path& unlabeled_manifest, const planner::Planner& teacher,
                                         const SamplingStrategy& s, double sigma_min, std::uint64_t master_seed,
                                         const fs::path& output, int threads) {
  s.validate();
  if (!(sigma_min >= 0.0 && sigma_min <= 1.0)) throw std::invalid_argument("sigma_min must lie in [0, 1]");
  const auto frames = core::read_manifest<core::UnlabeledFrame>(unlabeled_manifest).records;
  const fs::path src_dir = fs::absolute(unlabeled_manifest).parent_path();
  const fs::path out_dir = fs::absolute(output).parent_path();
  fs::create_directories(out_dir);
  const std::string teacher_id = planner::model_id(teacher);

  std::vector<std::vector<core::PseudoLabeledSample>> per_frame(frames.size());
  core::parallel_for(frames.size(), threads, [&](std::size_t i) {
    const auto& f = frames[i];
    const core::Image image = core::read_ppm(src_dir / f.image);
    std::mt19937_64 rng(core::mix_seed(master_seed, static_cast<std::uint64_t>(i)));
    const FrameRef ref{(src_dir / f.image).lexically_normal().lexically_relative(out_dir).generic_string(),
                       f.episode_id, f.frame_index};
    per_frame[i] = what_if_labels(teacher, teacher_id, image, ref, s, rng);
  });

  PseudoDatasetResult result;
  result.frames = frames.size();
  std::vector<core::PseudoLabeledSample> kept;
  for (auto& recs : per_frame) {
    result.generated += recs.size();
    auto part = filter_by_quality(recs, sigma_min);
    for (auto& r : part.kept) kept.push_back(std::move(r));
  }
  result.kept = kept.size();
  result.info = core::write_manifest(output, "pseudo", master_seed, kept);
  return result;
}

std::size_t count_fidelity_mismatches(const fs::path& pseudo_manifest, const planner::Planner& teacher,
                                      int threads) {
  const auto records = core::read_manifest<core::PseudoLabeledSample>(pseudo_manifest).records;
  const fs::path dir = fs::absolute(pseudo_manifest).parent_path();
  std::vector<char> bad(records.size(), 0);
  core::parallel_for(records.size(), threads, [&](std::size_t i) {
    const auto& r = records[i];
    const core::Image image = core::read_ppm(dir / r.image);
    const auto plan = teacher.forward(core::Observation{image, r.sampled_speed, r.sampled_command});
    bad[i] = !(plan == r.pseudo_plan);
  });
  return static_cast<std::size_t>(std::count(bad.begin(), bad.end(), 1));
}

}  // namespace selfd::pseudo
