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

// Command line front end: dataset generation, the staged training pipeline, evaluation and the
// experiment suite.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "selfd/core/manifest.hpp"
#include "selfd/experiments/experiments.hpp"
#include "selfd/metrics/closed_loop.hpp"
#include "selfd/planner/checkpoint.hpp"
#include "selfd/pseudo/what_if.hpp"
#include "selfd/sim/dataset.hpp"
#include "selfd/train/selfd.hpp"

namespace fs = std::filesystem;
using namespace selfd;

namespace {

void log_line(const std::string& s) {
  using clock = std::chrono::system_clock;
  const auto t = clock::to_time_t(clock::now());
  char buf[16];
  std::strftime(buf, sizeof buf, "%H:%M:%S", std::localtime(&t));
  std::cerr << '[' << buf << "] " << s << std::endl;
}

nlohmann::json load_json(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return nlohmann::json::parse(in);
}

// Applies "a.b.c=value" overrides. The value is parsed as JSON when possible, else taken as a string.
void apply_overrides(nlohmann::json& j, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("override must look like key=value: " + s);
    std::string key = s.substr(0, eq);
    const std::string raw = s.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    std::string pointer = "/";
    for (char c : key) pointer += c == '.' ? '/' : c;
    j[nlohmann::json::json_pointer(pointer)] = value;
  }
}

template <typename Config>
Config load_config(const std::string& path, const std::vector<std::string>& sets) {
  auto j = load_json(path);
  apply_overrides(j, sets);
  return j.get<Config>();
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

void print_report(const metrics::MetricsReport& r) { std::cout << nlohmann::json(r).dump(1) << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"selfd: semi-supervised driving policy training from unlabeled frames"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  int threads = 1;
  auto common = [&](CLI::App* cmd, bool config_required = false) {
    auto* opt = cmd->add_option("--config", config_path, "JSON config file");
    if (config_required) opt->required();
    cmd->add_option("--set", sets, "override a config entry, e.g. --set teacher.epochs=5");
    cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  };

  // generate
  auto* gen = app.add_subcommand("generate", "render labeled, unlabeled and eval splits");
  std::string out_dir;
  common(gen);
  gen->add_option("--out", out_dir, "output directory")->required();

  // train-teacher
  auto* teach = app.add_subcommand("train-teacher", "train the teacher on the labeled split");
  std::string labeled, unlabeled, eval_manifest, checkpoint, init;
  common(teach);
  teach->add_option("--labeled", labeled, "labeled manifest")->required();
  teach->add_option("--eval", eval_manifest, "optional eval manifest");
  teach->add_option("--out", out_dir, "output directory")->required();

  // pseudo-label
  auto* label = app.add_subcommand("pseudo-label", "what-if pseudo-label an unlabeled split with a teacher");
  std::string strategy = "uniform", output;
  int samples_per_frame = 6;
  double sigma_min = 0.0;
  std::uint64_t seed = 1;
  common(label);
  label->add_option("--teacher", checkpoint, "teacher checkpoint")->required();
  label->add_option("--unlabeled", unlabeled, "unlabeled manifest")->required();
  label->add_option("--labeled", labeled, "labeled manifest (fits prior and fixed strategies)");
  label->add_option("--strategy", strategy, "uniform, prior or fixed")
      ->check(CLI::IsMember({"uniform", "prior", "fixed"}));
  label->add_option("--samples-per-frame", samples_per_frame, "what-if samples per frame")->check(CLI::NonNegativeNumber);
  label->add_option("--sigma-min", sigma_min, "quality filter threshold")->check(CLI::Range(0.0, 1.0));
  label->add_option("--seed", seed, "sampling seed");
  label->add_option("--out", output, "output manifest path")->required();

  // pretrain / finetune
  auto* pre = app.add_subcommand("pretrain", "train a freshly initialized student on pseudo labels");
  common(pre);
  pre->add_option("--pseudo", unlabeled, "pseudo-labeled manifest")->required();
  pre->add_option("--eval", eval_manifest, "optional eval manifest");
  pre->add_option("--seed", seed, "student initialization seed");
  pre->add_option("--out", output, "output checkpoint")->required();

  auto* fine = app.add_subcommand("finetune", "fine-tune a pre-trained student on the labeled split");
  common(fine);
  fine->add_option("--init", init, "pre-trained checkpoint")->required();
  fine->add_option("--labeled", labeled, "labeled manifest")->required();
  fine->add_option("--eval", eval_manifest, "optional eval manifest");
  fine->add_option("--out", output, "output checkpoint")->required();

  // run-all
  auto* all = app.add_subcommand("run-all", "teacher, pseudo labels, pre-training and fine-tuning");
  int iterations = 0;
  common(all);
  all->add_option("--labeled", labeled, "labeled manifest")->required();
  all->add_option("--unlabeled", unlabeled, "unlabeled manifest")->required();
  all->add_option("--eval", eval_manifest, "optional eval manifest");
  all->add_option("--iterations", iterations, "self-training iterations (overrides the config)");
  all->add_option("--out", out_dir, "output directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "open- or closed-loop evaluation of a checkpoint");
  bool closed = false, expert = false;
  common(ev);
  ev->add_option("--checkpoint", checkpoint, "model checkpoint");
  ev->add_option("--open-loop", eval_manifest, "labeled or eval manifest");
  ev->add_flag("--closed-loop", closed, "drive the closed-loop routes (config: closed-loop settings)");
  ev->add_flag("--expert", expert, "drive the routes with the privileged expert instead of a model");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run an ablation: architecture, whatif, scaling, closedloop, iterations");
  std::string name;
  bool parallel_cells = false;
  common(exp);
  exp->add_option("name", name, "ablation name")->required();
  exp->add_option("--out", out_dir, "run directory (shared across ablations)")->required();
  exp->add_flag("--parallel-cells", parallel_cells, "run independent cells concurrently");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      auto c = load_config<sim::DatasetConfig>(config_path, sets);
      c.threads = threads;
      const auto r = sim::generate_dataset(c, out_dir);
      std::cout << "labeled " << r.labeled_frames << " frames -> " << r.labeled.string() << "\n"
                << "unlabeled " << r.unlabeled_frames << " frames -> " << r.unlabeled.string() << "\n"
                << "eval " << r.eval_frames << " frames -> " << r.eval.string() << "\n";
      if (r.expert_collisions > 0) std::cout << "warning: " << r.expert_collisions << " expert collisions\n";
    } else if (teach->parsed()) {
      auto c = load_config<train::SelfDConfig>(config_path, sets);
      c.threads = threads;
      const auto set = train::load_labeled_set(labeled, threads);
      std::optional<train::TrainingSet> eval;
      if (!eval_manifest.empty()) eval = train::load_labeled_set(eval_manifest, threads);
      const auto art = train::train_teacher(set, c, out_dir, eval ? &*eval : nullptr, log_line);
      std::cout << "teacher " << art.model_id << " -> " << art.checkpoint.string() << "\n";
      if (art.eval) print_report(*art.eval);
    } else if (label->parsed()) {
      auto c = load_config<train::SelfDConfig>(config_path, sets);
      c.strategy.kind = core::sampling_kind_from_name(strategy);
      c.strategy.samples_per_frame = samples_per_frame;
      pseudo::SamplingStrategy s = c.strategy;
      if (c.strategy.kind != core::SamplingKind::kUniform && c.fit_prior) {
        if (labeled.empty()) throw std::invalid_argument("--labeled is required to fit the prior or fixed strategy");
        s = train::resolve_strategy(c, labeled);
      }
      const auto teacher = planner::load_checkpoint(checkpoint).model;
      const auto r = pseudo::build_pseudo_dataset(unlabeled, teacher, s, sigma_min, seed, output, threads);
      std::cout << r.frames << " frames, " << r.generated << " labels generated, " << r.kept << " kept -> " << output
                << "\n";
    } else if (pre->parsed() || fine->parsed()) {
      auto c = load_config<train::SelfDConfig>(config_path, sets);
      const bool is_pre = pre->parsed();
      const auto data = is_pre ? train::load_pseudo_set(unlabeled, threads) : train::load_labeled_set(labeled, threads);
      std::optional<train::TrainingSet> eval;
      if (!eval_manifest.empty()) eval = train::load_labeled_set(eval_manifest, threads);
      planner::Planner model = is_pre ? planner::Planner(c.planner, seed) : planner::load_checkpoint(init).model;
      train::TrainOptions opt;
      opt.eval = eval ? &*eval : nullptr;
      opt.checkpoint = output;
      opt.on_epoch = [](const train::EpochRecord& r) {
        log_line("epoch " + std::to_string(r.epoch) + " loss " + std::to_string(r.loss) + " train ADE " +
                 std::to_string(r.train_ade) + (r.eval_ade ? " eval ADE " + std::to_string(*r.eval_ade) : ""));
      };
      const auto hist = train::train(model, data, is_pre ? c.pretrain : c.finetune,
                                     is_pre ? train::Stage::kPretrain : train::Stage::kFinetune, opt);
      fs::path hist_path = output;
      hist_path.replace_extension(".json");
      write_json(hist_path, hist);
      std::cout << hist.stage << " " << hist.final_model_id << " -> " << output << "\n";
    } else if (all->parsed()) {
      auto c = load_config<train::SelfDConfig>(config_path, sets);
      c.threads = threads;
      if (iterations > 0) c.iterations = iterations;
      std::optional<train::TrainingSet> eval;
      if (!eval_manifest.empty()) eval = train::load_labeled_set(eval_manifest, threads);
      const auto res = train::run_selfd(labeled, unlabeled, c, out_dir, eval ? &*eval : nullptr, log_line);
      for (const auto& a : res.checkpoints) {
        std::cout << a.stage << (a.iteration ? " " + std::to_string(a.iteration) : "") << ": " << a.checkpoint.string();
        if (a.eval) std::cout << "  ADE " << a.eval->ade << "  FDE " << a.eval->fde;
        std::cout << "\n";
      }
    } else if (ev->parsed()) {
      if (!closed && eval_manifest.empty()) throw std::invalid_argument("choose --open-loop and/or --closed-loop");
      if (!expert && checkpoint.empty()) throw std::invalid_argument("--checkpoint is required");
      std::optional<planner::Planner> model;
      if (!checkpoint.empty()) model = planner::load_checkpoint(checkpoint).model;
      if (!eval_manifest.empty()) {
        if (!model) throw std::invalid_argument("open-loop evaluation needs a checkpoint");
        print_report(train::evaluate_open_loop(*model, train::load_labeled_set(eval_manifest, threads)));
      }
      if (closed) {
        auto cl = load_config<metrics::ClosedLoopConfig>(config_path, sets);
        cl.threads = threads;
        if (model) {
          cl.camera.width = model->config().input_width;
          cl.camera.height = model->config().input_height;
        }
        std::unique_ptr<metrics::Policy> policy;
        if (expert) {
          policy = std::make_unique<metrics::ExpertPolicy>(cl.expert);
        } else {
          policy = std::make_unique<metrics::ModelPolicy>(*model);
        }
        const auto report = metrics::closed_loop_eval(*policy, cl);
        for (const auto& r : report.routes) {
          std::printf("route %2d %-6s %s  RC %.2f  %.0f m  collisions %d  deviations %d\n", r.route,
                      std::string(sim::appearance_name(r.appearance)).c_str(), r.success ? "ok  " : "fail",
                      r.completion, r.meters, r.collisions, r.deviations);
        }
        std::cout << nlohmann::json(metrics::summarize(report)).dump(1) << std::endl;
      }
    } else if (exp->parsed()) {
      auto c = load_config<experiments::ExperimentConfig>(config_path, sets);
      c.threads = threads;
      c.parallel_cells = c.parallel_cells || parallel_cells;
      const auto which = experiments::ablation_from_name(name);
      const auto report = experiments::run_ablation(which, c, out_dir, log_line);
      std::cout << experiments::markdown_table(report);
      std::cout << "\nwritten to " << (fs::path(out_dir) / name).string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
