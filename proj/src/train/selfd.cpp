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

#include "selfd/train/selfd.hpp"

#include <fstream>
#include <stdexcept>

#include "selfd/core/manifest.hpp"
#include "selfd/planner/checkpoint.hpp"

namespace selfd::train {
namespace fs = std::filesystem;

void SelfDConfig::validate() const {
  planner.validate();
  teacher.validate();
  pretrain.validate();
  finetune.validate();
  if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
  if (!(sigma_min >= 0.0 && sigma_min <= 1.0)) throw std::invalid_argument("sigma_min must lie in [0, 1]");
  if (strategy.kind != core::SamplingKind::kPrior || !fit_prior) strategy.validate();
}

void to_json(nlohmann::json& j, const SelfDConfig& c) {
  j = nlohmann::json{{"seed", c.seed},
                     {"planner", c.planner},
                     {"teacher", c.teacher},
                     {"pretrain", c.pretrain},
                     {"finetune", c.finetune},
                     {"strategy", c.strategy},
                     {"fit_prior", c.fit_prior},
                     {"sigma_min", c.sigma_min},
                     {"iterations", c.iterations},
                     {"threads", c.threads},
                     {"reuse_cached", c.reuse_cached},
                     {"teacher_checkpoint", c.teacher_checkpoint.string()}};
}

void from_json(const nlohmann::json& j, SelfDConfig& c) {
  c.seed = j.value("seed", c.seed);
  if (j.contains("planner")) c.planner = j.at("planner").get<planner::PlannerConfig>();
  if (j.contains("teacher")) c.teacher = j.at("teacher").get<TrainConfig>();
  if (j.contains("pretrain")) c.pretrain = j.at("pretrain").get<TrainConfig>();
  if (j.contains("finetune")) c.finetune = j.at("finetune").get<TrainConfig>();
  if (j.contains("strategy")) c.strategy = j.at("strategy").get<pseudo::SamplingStrategy>();
  c.fit_prior = j.value("fit_prior", c.fit_prior);
  c.sigma_min = j.value("sigma_min", c.sigma_min);
  c.iterations = j.value("iterations", c.iterations);
  c.threads = j.value("threads", c.threads);
  c.reuse_cached = j.value("reuse_cached", c.reuse_cached);
  c.teacher_checkpoint = j.value("teacher_checkpoint", c.teacher_checkpoint.string());
}

pseudo::SamplingStrategy resolve_strategy(const SelfDConfig& config, const fs::path& labeled_manifest) {
  if (!config.fit_prior || config.strategy.kind == core::SamplingKind::kUniform) return config.strategy;
  const auto labeled = core::read_manifest<core::LabeledSample>(labeled_manifest, {false}).records;
  pseudo::SamplingStrategy fitted = config.strategy.kind == core::SamplingKind::kPrior
                                        ? pseudo::prior_from_labeled(labeled, config.strategy.samples_per_frame)
                                        : pseudo::fixed_from_labeled(labeled);
  return fitted;
}

namespace {

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) return nullptr;
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception&) {
    return nullptr;
  }
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(1) << '\n';
}

std::string cache_key(const nlohmann::json& inputs) { return core::hex64(core::fnv1a64(inputs.dump())); }

struct StageSpec {
  std::string name;
  int iteration = 0;
  Stage stage = Stage::kTeacher;
  TrainConfig config;
  fs::path checkpoint;
  fs::path sidecar;
};

// Trains `model` for one stage unless a sidecar with the same inputs exists, in which case the
// checkpoint is loaded instead.
StageArtifact run_stage(planner::Planner& model, const TrainingSet& data, const StageSpec& spec,
                        const SelfDConfig& config, const TrainingSet* eval,
                        const std::function<void(const std::string&)>& log) {
  StageArtifact art;
  art.stage = spec.name;
  art.iteration = spec.iteration;
  art.checkpoint = spec.checkpoint;
  art.history = spec.sidecar;
  art.init_model_id = planner::model_id(model);
  const nlohmann::json inputs = {{"stage", spec.name},
                                 {"train", spec.config},
                                 {"planner", model.config()},
                                 {"dataset", data.fingerprint},
                                 {"init", art.init_model_id},
                                 {"eval", eval ? eval->fingerprint : std::string()}};
  const std::string key = cache_key(inputs);

  if (config.reuse_cached && fs::exists(spec.checkpoint)) {
    const auto side = read_json(spec.sidecar);
    if (side.is_object() && side.value("key", std::string()) == key) {
      try {
        auto loaded = planner::load_checkpoint(spec.checkpoint, model.config());
        if (planner::model_id(loaded.model) == side.value("model_id", std::string())) {
          model = std::move(loaded.model);
          art.model_id = planner::model_id(model);
          art.cached = true;
          if (side.contains("eval") && !side.at("eval").is_null()) art.eval = side.at("eval").get<metrics::MetricsReport>();
          if (log) log(spec.name + ": reused " + spec.checkpoint.string());
          return art;
        }
      } catch (const planner::CheckpointError&) {
        // Fall through and retrain.
      }
    }
  }

  fs::create_directories(spec.checkpoint.parent_path());
  TrainOptions opt;
  opt.checkpoint = spec.checkpoint;
  opt.on_epoch = [&](const EpochRecord& r) {
    if (log) {
      log(spec.name + " epoch " + std::to_string(r.epoch) + "/" + std::to_string(spec.config.epochs) +
          " loss " + std::to_string(r.loss) + " train_ade " + std::to_string(r.train_ade));
    }
  };
  const TrainHistory hist = train(model, data, spec.config, spec.stage, opt);
  art.model_id = planner::model_id(model);
  if (eval) art.eval = evaluate_open_loop(model, *eval);
  nlohmann::json side = {{"key", key}, {"inputs", inputs}, {"model_id", art.model_id}, {"history", hist}};
  side["eval"] = art.eval ? nlohmann::json(*art.eval) : nlohmann::json(nullptr);
  write_json(spec.sidecar, side);
  if (log && art.eval) log(spec.name + ": eval ADE " + std::to_string(art.eval->ade));
  return art;
}

TrainConfig seeded(TrainConfig c, std::uint64_t seed) {
  c.seed = seed;
  return c;
}

}  // namespace

StageArtifact train_teacher(const TrainingSet& labeled, const SelfDConfig& config, const fs::path& out_dir,
                            const TrainingSet* eval, const std::function<void(const std::string&)>& log) {
  planner::Planner model(config.planner, core::mix_seed(config.seed, 1));
  StageSpec spec{"teacher", 0, Stage::kTeacher, seeded(config.teacher, core::mix_seed(config.seed, 2)),
                 out_dir / "teacher.ckpt", out_dir / "teacher.json"};
  return run_stage(model, labeled, spec, config, eval, log);
}

SelfDResult run_selfd(const fs::path& labeled_manifest, const fs::path& unlabeled_manifest, const SelfDConfig& config,
                      const fs::path& out_dir, const TrainingSet* eval,
                      const std::function<void(const std::string&)>& log) {
  config.validate();
  fs::create_directories(out_dir);
  const TrainingSet labeled = load_labeled_set(labeled_manifest, config.threads);
  const pseudo::SamplingStrategy strategy = resolve_strategy(config, labeled_manifest);
  const std::string unlabeled_fp = core::manifest_fingerprint(unlabeled_manifest);

  SelfDResult result;
  if (config.teacher_checkpoint.empty()) {
    result.checkpoints.push_back(train_teacher(labeled, config, out_dir, eval, log));
  } else {
    StageArtifact art;
    art.stage = "teacher";
    art.checkpoint = config.teacher_checkpoint;
    const auto loaded = planner::load_checkpoint(config.teacher_checkpoint, config.planner);
    art.model_id = planner::model_id(loaded.model);
    art.cached = true;
    if (eval) art.eval = evaluate_open_loop(loaded.model, *eval);
    result.checkpoints.push_back(std::move(art));
  }
  planner::Planner teacher = planner::load_checkpoint(result.checkpoints.back().checkpoint, config.planner).model;

  for (int it = 1; it <= config.iterations; ++it) {
    const fs::path iter_dir = out_dir / ("iter" + std::to_string(it));
    const fs::path pseudo_manifest = iter_dir / "pseudo" / "manifest.jsonl";
    const std::uint64_t label_seed = core::mix_seed(config.seed, 100 + static_cast<std::uint64_t>(it));
    const nlohmann::json pseudo_inputs = {{"teacher", planner::model_id(teacher)},
                                          {"strategy", strategy},
                                          {"sigma_min", config.sigma_min},
                                          {"seed", label_seed},
                                          {"unlabeled", unlabeled_fp}};
    const std::string pseudo_key = cache_key(pseudo_inputs);
    const auto meta = read_json(iter_dir / "pseudo" / "meta.json");
    const bool reuse = config.reuse_cached && fs::exists(pseudo_manifest) && meta.is_object() &&
                       meta.value("key", std::string()) == pseudo_key;
    if (!reuse) {
      const auto built = pseudo::build_pseudo_dataset(unlabeled_manifest, teacher, strategy, config.sigma_min,
                                                      label_seed, pseudo_manifest, config.threads);
      write_json(iter_dir / "pseudo" / "meta.json", {{"key", pseudo_key},
                                                     {"inputs", pseudo_inputs},
                                                     {"frames", built.frames},
                                                     {"generated", built.generated},
                                                     {"kept", built.kept}});
      if (log) log("pseudo-labels iteration " + std::to_string(it) + ": " + std::to_string(built.kept) + " records");
    }
    result.pseudo_manifests.push_back(pseudo_manifest);
    const TrainingSet pseudo_set = load_pseudo_set(pseudo_manifest, config.threads);

    // The student starts from scratch with its own initialization.
    planner::Planner student(config.planner, core::mix_seed(config.seed, 1000 + static_cast<std::uint64_t>(it)));
    StageSpec pre{"pretrained", it, Stage::kPretrain,
                  seeded(config.pretrain, core::mix_seed(config.seed, 2000 + static_cast<std::uint64_t>(it))),
                  iter_dir / "pretrained.ckpt", iter_dir / "pretrained.json"};
    result.checkpoints.push_back(run_stage(student, pseudo_set, pre, config, eval, log));
    StageSpec fine{"finetuned", it, Stage::kFinetune,
                   seeded(config.finetune, core::mix_seed(config.seed, 3000 + static_cast<std::uint64_t>(it))),
                   iter_dir / "finetuned.ckpt", iter_dir / "finetuned.json"};
    result.checkpoints.push_back(run_stage(student, labeled, fine, config, eval, log));
    teacher = std::move(student);
  }
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& a : result.checkpoints) {
    nlohmann::json row = {{"stage", a.stage},
                          {"iteration", a.iteration},
                          {"checkpoint", a.checkpoint.string()},
                          {"model_id", a.model_id},
                          {"init_model_id", a.init_model_id},
                          {"cached", a.cached}};
    row["eval"] = a.eval ? nlohmann::json(*a.eval) : nlohmann::json(nullptr);
    summary.push_back(row);
  }
  write_json(out_dir / "stages.json", summary);
  return result;
}

}  // namespace selfd::train
