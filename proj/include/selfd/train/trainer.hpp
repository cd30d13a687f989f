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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "selfd/metrics/report.hpp"
#include "selfd/planner/network.hpp"
#include "selfd/train/data.hpp"

namespace selfd::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::string lr_schedule = "constant";  // or "cosine": decays to zero over the run
  int batch_size = 32;
  int epochs = 30;
  double lambda = 0.1;             // weight of the quality loss
  double quality_threshold = 1.0;  // ADE (m) at or below which the quality target is 1
  std::uint64_t seed = 1;
  int checkpoint_every = 0;  // epochs between intermediate checkpoints, 0 = final only
  int eval_every = 0;        // epochs between eval passes, 0 = final epoch only

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

enum class Stage { kTeacher, kPretrain, kFinetune };

std::string_view stage_name(Stage s);
Stage stage_from_name(std::string_view name);

/// Raised when a stage is handed the wrong kind of dataset.
class StageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct EpochRecord {
  int epoch = 0;
  long steps = 0;
  double loss = 0.0;
  double plan_loss = 0.0;
  double quality_loss = 0.0;
  double train_ade = 0.0;
  std::optional<double> eval_ade;
  std::optional<double> eval_fde;
  double wall_s = 0.0;
};

struct TrainHistory {
  std::string stage;
  std::uint64_t seed = 0;
  std::string dataset_fingerprint;
  std::string initial_model_id;
  std::string final_model_id;
  std::vector<EpochRecord> epochs;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);
void to_json(nlohmann::json& j, const TrainHistory& h);
void from_json(const nlohmann::json& j, TrainHistory& h);

struct TrainOptions {
  const TrainingSet* eval = nullptr;
  std::filesystem::path checkpoint;  // written after the final epoch (and every checkpoint_every epochs)
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Mini-batch Adam on the plan + lambda * quality loss. Teacher and fine-tune stages accept only
/// labeled sets, pre-training only pseudo-labeled sets. A non-finite loss or gradient restores
/// the parameters of the last completed epoch, rewrites the checkpoint and rethrows
/// planner::NonFiniteError.
TrainHistory train(planner::Planner& model, const TrainingSet& data, const TrainConfig& config, Stage stage,
                   const TrainOptions& options = {});

/// ADE, FDE and (where annotated) collision rate of the model on a labeled set. Never modifies
/// the model.
metrics::MetricsReport evaluate_open_loop(const planner::Planner& model, const TrainingSet& eval,
                                          const std::string& split = "eval");

}  // namespace selfd::train
