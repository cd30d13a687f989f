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
#include <vector>

#include "selfd/metrics/report.hpp"
#include "selfd/planner/config.hpp"
#include "selfd/pseudo/what_if.hpp"
#include "selfd/train/trainer.hpp"

namespace selfd::train {

struct SelfDConfig {
  std::uint64_t seed = 1;
  planner::PlannerConfig planner;
  TrainConfig teacher;
  TrainConfig pretrain;
  TrainConfig finetune;
  pseudo::SamplingStrategy strategy;
  bool fit_prior = true;  // PRIOR and FIXED strategies are fitted on the labeled set
  double sigma_min = 0.0;
  int iterations = 1;
  int threads = 1;
  bool reuse_cached = true;  // skip stages whose inputs match a previous run in the same directory
  std::filesystem::path teacher_checkpoint;  // when set, the teacher is loaded instead of trained

  void validate() const;
};

void to_json(nlohmann::json& j, const SelfDConfig& c);
void from_json(const nlohmann::json& j, SelfDConfig& c);

struct StageArtifact {
  std::string stage;  // teacher, pretrained, finetuned
  int iteration = 0;  // 0 for the teacher
  std::filesystem::path checkpoint;
  std::filesystem::path history;
  std::string model_id;
  std::string init_model_id;
  bool cached = false;
  std::optional<metrics::MetricsReport> eval;
};

struct SelfDResult {
  std::vector<StageArtifact> checkpoints;
  std::vector<std::filesystem::path> pseudo_manifests;
  const StageArtifact& final() const { return checkpoints.back(); }
};

/// Trains a teacher on the labeled set, pseudo-labels the unlabeled pool, pre-trains a freshly
/// initialized student on the pseudo labels and fine-tunes it on the labeled set. Further
/// iterations use the latest fine-tuned model as the teacher. Produces 1 + 2 * iterations
/// checkpoints under `out_dir`. When `eval` is given each stage is evaluated on it.
SelfDResult run_selfd(const std::filesystem::path& labeled_manifest, const std::filesystem::path& unlabeled_manifest,
                      const SelfDConfig& config, const std::filesystem::path& out_dir,
                      const TrainingSet* eval = nullptr,
                      const std::function<void(const std::string&)>& log = {});

/// Teacher stage only (cached like run_selfd).
StageArtifact train_teacher(const TrainingSet& labeled, const SelfDConfig& config,
                            const std::filesystem::path& out_dir, const TrainingSet* eval = nullptr,
                            const std::function<void(const std::string&)>& log = {});

/// Sampling strategy after fitting PRIOR/FIXED statistics on the labeled set.
pseudo::SamplingStrategy resolve_strategy(const SelfDConfig& config, const std::filesystem::path& labeled_manifest);

}  // namespace selfd::train
