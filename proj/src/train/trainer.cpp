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

#include "selfd/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "selfd/metrics/open_loop.hpp"
#include "selfd/planner/adam.hpp"
#include "selfd/planner/checkpoint.hpp"
#include "selfd/planner/ops.hpp"

namespace selfd::train {

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid train config: ") + what);
  };
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning rate must be positive");
  require(lr_schedule == "constant" || lr_schedule == "cosine", "lr schedule must be constant or cosine");
  require(batch_size >= 1, "batch size must be positive");
  require(epochs >= 0, "epochs must be non-negative");
  require(lambda >= 0.0, "lambda must be non-negative");
  require(quality_threshold > 0.0, "quality threshold must be positive");
  require(checkpoint_every >= 0 && eval_every >= 0, "cadences must be non-negative");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"lr_schedule", c.lr_schedule},
                     {"batch_size", c.batch_size},
                     {"epochs", c.epochs},
                     {"lambda", c.lambda},
                     {"quality_threshold", c.quality_threshold},
                     {"seed", c.seed},
                     {"checkpoint_every", c.checkpoint_every},
                     {"eval_every", c.eval_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lr_schedule = j.value("lr_schedule", c.lr_schedule);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.lambda = j.value("lambda", c.lambda);
  c.quality_threshold = j.value("quality_threshold", c.quality_threshold);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.eval_every = j.value("eval_every", c.eval_every);
}

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::kTeacher: return "teacher";
    case Stage::kPretrain: return "pretrain";
    case Stage::kFinetune: return "finetune";
  }
  return "?";
}

Stage stage_from_name(std::string_view name) {
  for (Stage s : {Stage::kTeacher, Stage::kPretrain, Stage::kFinetune}) {
    if (stage_name(s) == name) return s;
  }
  throw std::invalid_argument("unknown stage '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = nlohmann::json{{"epoch", r.epoch},         {"steps", r.steps},
                     {"loss", r.loss},           {"plan_loss", r.plan_loss},
                     {"quality_loss", r.quality_loss}, {"train_ade", r.train_ade},
                     {"wall_s", r.wall_s}};
  j["eval_ade"] = r.eval_ade ? nlohmann::json(*r.eval_ade) : nlohmann::json(nullptr);
  j["eval_fde"] = r.eval_fde ? nlohmann::json(*r.eval_fde) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<int>();
  r.steps = j.value("steps", 0L);
  r.loss = j.at("loss").get<double>();
  r.plan_loss = j.at("plan_loss").get<double>();
  r.quality_loss = j.at("quality_loss").get<double>();
  r.train_ade = j.value("train_ade", 0.0);
  r.wall_s = j.value("wall_s", 0.0);
  r.eval_ade.reset();
  r.eval_fde.reset();
  if (j.contains("eval_ade") && !j.at("eval_ade").is_null()) r.eval_ade = j.at("eval_ade").get<double>();
  if (j.contains("eval_fde") && !j.at("eval_fde").is_null()) r.eval_fde = j.at("eval_fde").get<double>();
}

void to_json(nlohmann::json& j, const TrainHistory& h) {
  j = nlohmann::json{{"stage", h.stage},
                     {"seed", h.seed},
                     {"dataset_fingerprint", h.dataset_fingerprint},
                     {"initial_model_id", h.initial_model_id},
                     {"final_model_id", h.final_model_id},
                     {"epochs", h.epochs}};
}

void from_json(const nlohmann::json& j, TrainHistory& h) {
  h.stage = j.at("stage").get<std::string>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
  h.initial_model_id = j.value("initial_model_id", std::string());
  h.final_model_id = j.value("final_model_id", std::string());
  h.epochs = j.at("epochs").get<std::vector<EpochRecord>>();
}

namespace {

void check_stage(const TrainingSet& data, Stage stage) {
  const bool want_pseudo = stage == Stage::kPretrain;
  if ((data.kind == DatasetKind::kPseudo) != want_pseudo) {
    throw StageError(std::string(stage_name(stage)) + " stage expects a " + (want_pseudo ? "pseudo-labeled" : "labeled") +
                     " dataset, got " + (data.kind == DatasetKind::kPseudo ? "pseudo-labeled" : "labeled") + " (" +
                     data.source + ", fingerprint " + data.fingerprint + ")");
  }
}

void check_resolution(const planner::Planner& model, const TrainingSet& data) {
  const auto& c = model.config();
  if (data.size() > 0 && (data.width != c.input_width || data.height != c.input_height)) {
    throw std::invalid_argument("dataset resolution " + std::to_string(data.width) + "x" + std::to_string(data.height) +
                                " does not match the planner input " + std::to_string(c.input_width) + "x" +
                                std::to_string(c.input_height));
  }
}

planner::Batch<float> make_batch(const TrainingSet& data, const std::vector<std::size_t>& order, std::size_t begin,
                                 std::size_t end) {
  planner::Batch<float> b;
  const int n = static_cast<int>(end - begin);
  const std::size_t stride = static_cast<std::size_t>(n) * data.width * data.height;
  b.images.resize(3, static_cast<Eigen::Index>(stride));
  for (std::size_t i = begin; i < end; ++i) {
    const std::size_t r = order[i];
    data.pack(r, static_cast<int>(i - begin), b.images.data(), stride);
    b.speeds.push_back(data.speeds[r]);
    b.commands.push_back(data.commands[r]);
    b.targets.push_back(data.targets[r]);
  }
  return b;
}

bool gradients_finite(const planner::Planner& model) {
  for (const auto& p : model.parameters()) {
    if (!p.grad.allFinite()) return false;
  }
  return true;
}

std::vector<planner::Matrix<float>> snapshot(const planner::Planner& model) {
  std::vector<planner::Matrix<float>> out;
  for (const auto& p : model.parameters()) out.push_back(p.value);
  return out;
}

void restore(planner::Planner& model, const std::vector<planner::Matrix<float>>& values) {
  auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value = values[i];
}

}  // namespace

TrainHistory train(planner::Planner& model, const TrainingSet& data, const TrainConfig& config, Stage stage,
                   const TrainOptions& options) {
  config.validate();
  check_stage(data, stage);
  check_resolution(model, data);
  if (data.size() == 0) throw std::invalid_argument("empty training set");
  if (options.eval) check_resolution(model, *options.eval);

  TrainHistory history;
  history.stage = std::string(stage_name(stage));
  history.seed = config.seed;
  history.dataset_fingerprint = data.fingerprint;
  history.initial_model_id = planner::model_id(model);

  planner::Adam<float> adam(model.parameters(), {config.learning_rate});
  std::mt19937_64 rng(core::mix_seed(config.seed, 0x7a11));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const planner::LossOptions loss{config.lambda, config.quality_threshold};
  long steps = 0;
  const long batches_per_epoch = static_cast<long>((data.size() + config.batch_size - 1) / config.batch_size);
  const double total_steps = static_cast<double>(batches_per_epoch) * config.epochs;
  const std::string tag(stage_name(stage));

  auto save = [&](long step) {
    if (!options.checkpoint.empty()) planner::save_checkpoint(options.checkpoint, model, {step, tag});
  };

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto last_good = snapshot(model);
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double seen = 0.0;
    try {
      for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
        const auto batch = make_batch(data, order, begin, end);
        const auto stats = model.forward_backward(batch, loss, &rng);
        if (!std::isfinite(stats.loss) || !gradients_finite(model)) {
          throw planner::NonFiniteError("non-finite loss or gradient at step " + std::to_string(steps + 1));
        }
        if (config.lr_schedule == "cosine") {
          adam.set_learning_rate(0.5 * config.learning_rate * (1.0 + std::cos(std::numbers::pi * static_cast<double>(steps) / total_steps)));
        }
        adam.step(model.parameters());
        ++steps;
        const double w = static_cast<double>(end - begin);
        rec.loss += w * stats.loss;
        rec.plan_loss += w * stats.plan_loss;
        rec.quality_loss += w * stats.quality_loss;
        rec.train_ade += w * stats.ade;
        seen += w;
      }
    } catch (const planner::NonFiniteError& e) {
      restore(model, last_good);
      save(steps);
      throw planner::NonFiniteError(std::string(e.what()) + " in " + tag + " epoch " + std::to_string(epoch) +
                                    "; parameters restored to the previous epoch");
    }
    rec.steps = steps;
    rec.loss /= seen;
    rec.plan_loss /= seen;
    rec.quality_loss /= seen;
    rec.train_ade /= seen;
    const bool eval_now = options.eval && options.eval->size() > 0 &&
                          (epoch == config.epochs || (config.eval_every > 0 && epoch % config.eval_every == 0));
    if (eval_now) {
      const auto report = evaluate_open_loop(model, *options.eval);
      rec.eval_ade = report.ade;
      rec.eval_fde = report.fde;
    }
    rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 && epoch != config.epochs) save(steps);
    history.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  save(steps);
  history.final_model_id = planner::model_id(model);
  return history;
}

metrics::MetricsReport evaluate_open_loop(const planner::Planner& model, const TrainingSet& eval,
                                          const std::string& split) {
  if (eval.size() == 0) throw std::invalid_argument("empty eval set");
  if (eval.kind != DatasetKind::kLabeled) throw std::invalid_argument("open-loop evaluation needs ground-truth plans");
  check_resolution(model, eval);
  constexpr std::size_t kChunk = 64;
  std::vector<std::size_t> order(eval.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<core::WaypointPlan> plans;
  plans.reserve(eval.size());
  for (std::size_t begin = 0; begin < eval.size(); begin += kChunk) {
    const std::size_t end = std::min(eval.size(), begin + kChunk);
    auto batch = make_batch(eval, order, begin, end);
    for (auto& p : model.forward_batch(batch, nullptr)) plans.push_back(std::move(p));
  }
  metrics::MetricsReport r;
  r.split = split;
  r.count = eval.size();
  for (std::size_t i = 0; i < eval.size(); ++i) {
    r.ade += metrics::ade(plans[i], eval.targets[i]);
    r.fde += metrics::fde(plans[i], eval.targets[i]);
  }
  r.ade /= static_cast<double>(eval.size());
  r.fde /= static_cast<double>(eval.size());
  r.collision_rate = metrics::collision_rate(plans, eval.agents);
  return r;
}

}  // namespace selfd::train
