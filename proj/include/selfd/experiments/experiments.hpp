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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selfd/metrics/closed_loop.hpp"
#include "selfd/metrics/report.hpp"
#include "selfd/sim/dataset.hpp"
#include "selfd/train/selfd.hpp"

namespace selfd::experiments {

enum class Ablation { kArchitecture, kWhatIf, kScaling, kClosedLoop, kIterations };

inline constexpr Ablation kAllAblations[] = {Ablation::kArchitecture, Ablation::kWhatIf, Ablation::kScaling,
                                             Ablation::kClosedLoop, Ablation::kIterations};

std::string_view ablation_name(Ablation a);
Ablation ablation_from_name(std::string_view name);

struct ExperimentConfig {
  sim::DatasetConfig data;          // generated under <run>/data unless data_dir is set
  std::filesystem::path data_dir;   // an existing dataset root with labeled/, unlabeled/, eval/
  train::SelfDConfig pipeline;      // planner, stage and pseudo-labeling settings shared by all cells
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<planner::Variant> variants{planner::Variant::kImagePlaneHomography, planner::Variant::kSingleBranchBev,
                                         planner::Variant::kMultiBranchBev};
  std::vector<std::size_t> pool_sizes{2500, 5000, 10000, 20000};
  int max_iterations = 2;
  metrics::ClosedLoopConfig closed_loop;
  bool parallel_cells = false;
  int threads = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// One (treatment, stage, seed) measurement.
struct Cell {
  std::string row;    // treatment label
  std::string stage;  // teacher, pretrained, finetuned, or reference
  std::uint64_t seed = 0;
  double x = 0.0;  // sweep coordinate: pool size or iteration, 0 when unused
  bool ok = false;
  std::string error;
  std::optional<metrics::MetricsReport> report;
  std::string checkpoint;
  std::string model_id;
  std::string config_fingerprint;
};

void to_json(nlohmann::json& j, const Cell& c);

/// Median over the seeds of one (row, stage) pair.
struct RowSummary {
  std::string row;
  std::string stage;
  double x = 0.0;
  int ok = 0;
  int failed = 0;
  double ade = 0.0;
  double fde = 0.0;
  std::optional<double> collision_rate;
  std::optional<metrics::ClosedLoopSummary> closed_loop;
};

struct AblationReport {
  Ablation ablation = Ablation::kArchitecture;
  std::vector<Cell> cells;
  std::vector<RowSummary> rows;

  const RowSummary* find(std::string_view row, std::string_view stage) const;
};

struct DatasetPaths {
  std::filesystem::path labeled;
  std::filesystem::path unlabeled;
  std::filesystem::path eval;
  sim::DatasetConfig config;
};

/// Generates the dataset under `root/data` (reused when its stored config matches) or resolves
/// `config.data_dir`.
DatasetPaths ensure_dataset(const ExperimentConfig& config, const std::filesystem::path& root,
                            const std::function<void(const std::string&)>& log = {});

/// Manifest holding the first `frames` records of an unlabeled manifest, written next to it.
std::filesystem::path prefix_manifest(const std::filesystem::path& unlabeled, std::size_t frames);

double median(std::vector<double> values);

/// Runs every cell of the ablation under `root` and writes table.md, table.csv, cells.json and
/// SVG plots to `root/<ablation name>/`. Checkpoints land in `root/teachers` and `root/selfd` and
/// are shared between ablations run under the same root. A failing cell is recorded and skipped.
AblationReport run_ablation(Ablation ablation, const ExperimentConfig& config, const std::filesystem::path& root,
                            const std::function<void(const std::string&)>& log = {});

std::string markdown_table(const AblationReport& report);
std::string csv_table(const AblationReport& report);
void write_report(const AblationReport& report, const std::filesystem::path& dir);

}  // namespace selfd::experiments
