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

#include "selfd/experiments/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "selfd/core/manifest.hpp"
#include "selfd/core/parallel.hpp"
#include "selfd/experiments/plot.hpp"
#include "selfd/planner/checkpoint.hpp"

namespace selfd::experiments {
namespace fs = std::filesystem;
using Log = std::function<void(const std::string&)>;

std::string_view ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kArchitecture: return "architecture";
    case Ablation::kWhatIf: return "whatif";
    case Ablation::kScaling: return "scaling";
    case Ablation::kClosedLoop: return "closedloop";
    case Ablation::kIterations: return "iterations";
  }
  return "?";
}

Ablation ablation_from_name(std::string_view name) {
  for (Ablation a : kAllAblations) {
    if (ablation_name(a) == name) return a;
  }
  throw std::invalid_argument("unknown ablation '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("experiment needs at least one seed");
  if (variants.empty()) throw std::invalid_argument("experiment needs at least one variant");
  if (pool_sizes.empty() || std::count(pool_sizes.begin(), pool_sizes.end(), std::size_t{0}) > 0) {
    throw std::invalid_argument("pool sizes must be positive");
  }
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
  if (threads < 1) throw std::invalid_argument("threads must be positive");
  pipeline.validate();
  closed_loop.validate();
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json variants = nlohmann::json::array();
  for (auto v : c.variants) variants.push_back(std::string(planner::variant_name(v)));
  j = nlohmann::json{{"data", c.data},
                     {"data_dir", c.data_dir.string()},
                     {"pipeline", c.pipeline},
                     {"seeds", c.seeds},
                     {"variants", variants},
                     {"pool_sizes", c.pool_sizes},
                     {"max_iterations", c.max_iterations},
                     {"closed_loop", c.closed_loop},
                     {"parallel_cells", c.parallel_cells},
                     {"threads", c.threads}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (j.contains("data")) c.data = j.at("data").get<sim::DatasetConfig>();
  c.data_dir = j.value("data_dir", c.data_dir.string());
  if (j.contains("pipeline")) c.pipeline = j.at("pipeline").get<train::SelfDConfig>();
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("variants")) {
    c.variants.clear();
    for (const auto& v : j.at("variants")) c.variants.push_back(planner::variant_from_name(v.get<std::string>()));
  }
  if (j.contains("pool_sizes")) c.pool_sizes = j.at("pool_sizes").get<std::vector<std::size_t>>();
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  if (j.contains("closed_loop")) c.closed_loop = j.at("closed_loop").get<metrics::ClosedLoopConfig>();
  c.parallel_cells = j.value("parallel_cells", c.parallel_cells);
  c.threads = j.value("threads", c.threads);
}

void to_json(nlohmann::json& j, const Cell& c) {
  j = nlohmann::json{{"row", c.row},
                     {"stage", c.stage},
                     {"seed", c.seed},
                     {"x", c.x},
                     {"ok", c.ok},
                     {"error", c.error},
                     {"checkpoint", c.checkpoint},
                     {"model_id", c.model_id},
                     {"config_fingerprint", c.config_fingerprint}};
  j["report"] = c.report ? nlohmann::json(*c.report) : nlohmann::json(nullptr);
}

const RowSummary* AblationReport::find(std::string_view row, std::string_view stage) const {
  for (const auto& r : rows) {
    if (r.row == row && r.stage == stage) return &r;
  }
  return nullptr;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
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

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

nlohmann::json comparable(sim::DatasetConfig c) {
  c.threads = 1;
  return c;
}

}  // namespace

DatasetPaths ensure_dataset(const ExperimentConfig& config, const fs::path& root, const Log& log) {
  const fs::path dir = config.data_dir.empty() ? root / "data" : config.data_dir;
  DatasetPaths out{dir / "labeled" / "manifest.jsonl", dir / "unlabeled" / "manifest.jsonl",
                   dir / "eval" / "manifest.jsonl", config.data};
  const bool present = fs::exists(out.labeled) && fs::exists(out.unlabeled) && fs::exists(out.eval);
  const auto stored = read_json(dir / "dataset_config.json");
  if (!config.data_dir.empty()) {
    if (!present || stored.is_null()) throw std::runtime_error("no dataset under " + dir.string());
    out.config = stored.get<sim::DatasetConfig>();
    return out;
  }
  if (present && !stored.is_null() && comparable(stored.get<sim::DatasetConfig>()) == comparable(config.data)) {
    if (log) log("dataset: reusing " + dir.string());
    return out;
  }
  fs::remove_all(dir);
  auto data = config.data;
  data.threads = config.threads;
  if (log) log("dataset: generating under " + dir.string());
  const auto gen = sim::generate_dataset(data, dir);
  if (log) {
    log("dataset: " + std::to_string(gen.labeled_frames) + " labeled, " + std::to_string(gen.unlabeled_frames) +
        " unlabeled, " + std::to_string(gen.eval_frames) + " eval frames");
  }
  return out;
}

fs::path prefix_manifest(const fs::path& unlabeled, std::size_t frames) {
  auto m = core::read_manifest<core::UnlabeledFrame>(unlabeled, {false});
  if (frames > m.records.size()) {
    throw std::invalid_argument("pool of " + std::to_string(frames) + " frames exceeds the " +
                                std::to_string(m.records.size()) + " available");
  }
  m.records.resize(frames);
  const fs::path out = unlabeled.parent_path() / ("manifest_" + std::to_string(frames) + ".jsonl");
  if (!fs::exists(out) || core::read_manifest_info(out).count != frames) {
    core::write_manifest(out, m.info.split, m.info.seed, m.records);
  }
  return out;
}

namespace {

struct Context {
  const ExperimentConfig& cfg;
  fs::path root;
  DatasetPaths data;
  train::TrainingSet labeled;
  train::TrainingSet eval;
  std::string unlabeled_fingerprint;
  Log log;
  std::mutex mu;

  void say(const std::string& s) {
    if (!log) return;
    std::lock_guard<std::mutex> lock(mu);
    log(s);
  }
};

std::string seed_tag(std::uint64_t seed) { return "s" + std::to_string(seed); }

std::string fingerprint(const nlohmann::json& j) { return core::hex64(core::fnv1a64(j.dump())); }

train::SelfDConfig cell_pipeline(const Context& ctx, std::uint64_t seed, planner::Variant variant) {
  train::SelfDConfig p = ctx.cfg.pipeline;
  p.seed = seed;
  p.planner.variant = variant;
  p.planner.input_width = ctx.data.config.camera.width;
  p.planner.input_height = ctx.data.config.camera.height;
  // The fixed-homography variant is calibrated for the labeled camera only.
  p.planner.homography_camera = ctx.data.config.camera;
  p.threads = ctx.cfg.threads;
  p.teacher_checkpoint.clear();
  return p;
}

std::string cell_fingerprint(const Context& ctx, const train::SelfDConfig& p, const std::string& unlabeled_fp,
                             const nlohmann::json& extra = nullptr) {
  return fingerprint({{"pipeline", p},
                      {"data", comparable(ctx.data.config)},
                      {"unlabeled", unlabeled_fp},
                      {"extra", extra}});
}

Cell cell_from(const train::StageArtifact& a, const std::string& row, std::uint64_t seed, double x,
               const std::string& fp) {
  Cell c;
  c.row = row;
  c.stage = a.stage;
  c.seed = seed;
  c.x = x;
  c.ok = a.eval.has_value();
  if (!c.ok) c.error = "stage produced no evaluation";
  c.report = a.eval;
  c.checkpoint = a.checkpoint.string();
  c.model_id = a.model_id;
  c.config_fingerprint = fp;
  return c;
}

// A unit of work that fills a fixed set of cells. On failure every cell is marked failed.
struct Job {
  std::vector<Cell> cells;
  std::function<std::vector<Cell>()> run;
};

Cell placeholder(const std::string& row, const std::string& stage, std::uint64_t seed, double x = 0.0) {
  Cell c;
  c.row = row;
  c.stage = stage;
  c.seed = seed;
  c.x = x;
  return c;
}

void run_jobs(Context& ctx, std::vector<Job>& jobs) {
  const int workers = ctx.cfg.parallel_cells ? ctx.cfg.threads : 1;
  core::parallel_for(jobs.size(), workers, [&](std::size_t i) {
    auto& job = jobs[i];
    try {
      job.cells = job.run();
    } catch (const std::exception& e) {
      for (auto& c : job.cells) {
        c.ok = false;
        c.error = e.what();
      }
      ctx.say("cell failed (" + job.cells.front().row + ", seed " + std::to_string(job.cells.front().seed) +
              "): " + e.what());
    }
  });
}

struct TeacherKey {
  planner::Variant variant;
  std::uint64_t seed;
  bool operator<(const TeacherKey& o) const {
    return std::tie(variant, seed) < std::tie(o.variant, o.seed);
  }
};

// Trains (or reuses) one teacher per seed and variant, sequentially or in parallel.
std::map<TeacherKey, Cell> train_teachers(Context& ctx, const std::vector<planner::Variant>& variants,
                                          const std::string& row_label = "") {
  std::vector<Job> jobs;
  std::vector<TeacherKey> keys;
  for (auto v : variants) {
    for (auto seed : ctx.cfg.seeds) {
      const std::string row = row_label.empty() ? std::string(planner::variant_name(v)) : row_label;
      keys.push_back({v, seed});
      jobs.push_back({{placeholder(row, "teacher", seed)}, [&ctx, v, seed, row] {
                        const auto p = cell_pipeline(ctx, seed, v);
                        const fs::path dir = ctx.root / "teachers" / (std::string(planner::variant_name(v)) + "_" +
                                                                     seed_tag(seed));
                        auto log = [&ctx](const std::string& s) { ctx.say(s); };
                        const auto art = train::train_teacher(ctx.labeled, p, dir, &ctx.eval, log);
                        return std::vector<Cell>{cell_from(art, row, seed, 0.0, cell_fingerprint(ctx, p, ""))};
                      }});
    }
  }
  run_jobs(ctx, jobs);
  std::map<TeacherKey, Cell> out;
  for (std::size_t i = 0; i < jobs.size(); ++i) out[keys[i]] = jobs[i].cells.front();
  return out;
}

// Pseudo-labels, pre-trains and fine-tunes from a shared teacher.
train::SelfDResult self_train(Context& ctx, train::SelfDConfig p, const Cell& teacher, const std::string& tag,
                              const fs::path& unlabeled) {
  if (!teacher.ok) throw std::runtime_error("teacher unavailable: " + teacher.error);
  p.teacher_checkpoint = teacher.checkpoint;
  const fs::path dir = ctx.root / "selfd" / (tag + "_" + seed_tag(p.seed));
  auto log = [&ctx](const std::string& s) { ctx.say(s); };
  return train::run_selfd(ctx.data.labeled, unlabeled, p, dir, &ctx.eval, log);
}

std::vector<Cell> stage_cells(const train::SelfDResult& res, const std::string& row, std::uint64_t seed, double x,
                              const std::string& fp, bool per_iteration = false) {
  std::vector<Cell> out;
  for (const auto& a : res.checkpoints) {
    if (a.stage == "teacher") continue;
    const std::string label = per_iteration ? row + " " + std::to_string(a.iteration) : row;
    out.push_back(cell_from(a, label, seed, per_iteration ? a.iteration : x, fp));
  }
  return out;
}

train::SelfDConfig with_strategy(train::SelfDConfig p, core::SamplingKind kind) {
  p.strategy.kind = kind;
  return p;
}

// Rows of an ablation, in the order the cells first appear.
std::vector<RowSummary> summarize_rows(const std::vector<Cell>& cells) {
  std::vector<RowSummary> rows;
  std::vector<std::vector<const Cell*>> members;
  for (const auto& c : cells) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const RowSummary& r) {
      return r.row == c.row && r.stage == c.stage;
    });
    if (it == rows.end()) {
      RowSummary r;
      r.row = c.row;
      r.stage = c.stage;
      r.x = c.x;
      rows.push_back(r);
      members.emplace_back();
      it = rows.end() - 1;
    }
    members[static_cast<std::size_t>(it - rows.begin())].push_back(&c);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& r = rows[i];
    std::vector<double> ade, fde, coll, sr, rc, c10k;
    for (const Cell* c : members[i]) {
      if (!c->ok || !c->report) {
        ++r.failed;
        continue;
      }
      ++r.ok;
      if (c->report->count > 0) {
        ade.push_back(c->report->ade);
        fde.push_back(c->report->fde);
      }
      if (c->report->collision_rate) coll.push_back(*c->report->collision_rate);
      if (c->report->closed_loop) {
        sr.push_back(c->report->closed_loop->success_rate);
        rc.push_back(c->report->closed_loop->route_completion);
        c10k.push_back(c->report->closed_loop->collisions_per_10km);
      }
    }
    r.ade = median(ade);
    r.fde = median(fde);
    if (!coll.empty()) r.collision_rate = median(coll);
    if (!sr.empty()) {
      metrics::ClosedLoopSummary s;
      s.success_rate = median(sr);
      s.route_completion = median(rc);
      s.collisions_per_10km = median(c10k);
      s.routes = members[i].front()->report->closed_loop->routes;
      r.closed_loop = s;
    }
  }
  return rows;
}

std::vector<Cell> closed_loop_cells(Context& ctx, const planner::Planner& model, Cell cell) {
  auto cl = ctx.cfg.closed_loop;
  cl.camera.width = model.config().input_width;
  cl.camera.height = model.config().input_height;
  cl.threads = ctx.cfg.threads;
  const metrics::ModelPolicy policy(model);
  const auto summary = metrics::summarize(metrics::closed_loop_eval(policy, cl));
  if (!cell.report) cell.report = metrics::MetricsReport{};
  cell.report->closed_loop = summary;
  cell.config_fingerprint = fingerprint({{"cell", cell.config_fingerprint}, {"closed_loop", cl}});
  return {cell};
}

}  // namespace

AblationReport run_ablation(Ablation ablation, const ExperimentConfig& config, const fs::path& root, const Log& log) {
  config.validate();
  Context ctx{config, root, {}, {}, {}, {}, log, {}};
  ctx.data = ensure_dataset(config, root, [&](const std::string& s) { ctx.say(s); });
  ctx.labeled = train::load_labeled_set(ctx.data.labeled, config.threads);
  ctx.eval = train::load_labeled_set(ctx.data.eval, config.threads);
  ctx.unlabeled_fingerprint = core::manifest_fingerprint(ctx.data.unlabeled);
  const std::size_t pool = core::read_manifest_info(ctx.data.unlabeled).count;
  const planner::Variant main_variant = config.pipeline.planner.variant;

  AblationReport report;
  report.ablation = ablation;
  std::vector<Job> jobs;

  if (ablation == Ablation::kArchitecture) {
    for (auto& [key, cell] : train_teachers(ctx, config.variants)) report.cells.push_back(cell);
    // Keep the configured variant order.
    std::stable_sort(report.cells.begin(), report.cells.end(), [&](const Cell& a, const Cell& b) {
      auto pos = [&](const std::string& name) {
        for (std::size_t i = 0; i < config.variants.size(); ++i) {
          if (planner::variant_name(config.variants[i]) == name) return i;
        }
        return config.variants.size();
      };
      return pos(a.row) < pos(b.row);
    });
  } else {
    auto teachers = train_teachers(ctx, {main_variant}, "no self-training");
    for (auto seed : config.seeds) {
      const Cell teacher = teachers.at({main_variant, seed});
      const auto base = cell_pipeline(ctx, seed, main_variant);
      if (ablation != Ablation::kClosedLoop) report.cells.push_back(teacher);

      switch (ablation) {
        case Ablation::kWhatIf: {
          const std::pair<const char*, core::SamplingKind> treatments[] = {
              {"w/o what-if", core::SamplingKind::kFixed},
              {"what-if prior", core::SamplingKind::kPrior},
              {"what-if uniform", core::SamplingKind::kUniform}};
          for (const auto& [row, kind] : treatments) {
            const std::string label = row;
            const auto p = with_strategy(base, kind);
            const std::string tag(core::sampling_kind_name(kind));
            jobs.push_back({{placeholder(label, "pretrained", seed), placeholder(label, "finetuned", seed)},
                            [&ctx, p, teacher, tag, label, seed] {
                              const auto res = self_train(ctx, p, teacher, tag, ctx.data.unlabeled);
                              return stage_cells(res, label, seed, 0.0,
                                                 cell_fingerprint(ctx, p, ctx.unlabeled_fingerprint));
                            }});
          }
          break;
        }
        case Ablation::kScaling: {
          for (std::size_t n : config.pool_sizes) {
            const std::string label = "pool " + std::to_string(n);
            const auto p = with_strategy(base, core::SamplingKind::kUniform);
            const double x = static_cast<double>(n);
            jobs.push_back({{placeholder(label, "pretrained", seed, x), placeholder(label, "finetuned", seed, x)},
                            [&ctx, p, teacher, label, seed, n, pool, x] {
                              const bool full = n == pool;
                              const fs::path manifest = full ? ctx.data.unlabeled : [&] {
                                std::lock_guard<std::mutex> lock(ctx.mu);
                                return prefix_manifest(ctx.data.unlabeled, n);
                              }();
                              const std::string tag = full ? "uniform" : "uniform_n" + std::to_string(n);
                              const auto res = self_train(ctx, p, teacher, tag, manifest);
                              return stage_cells(res, label, seed, x,
                                                 cell_fingerprint(ctx, p, core::manifest_fingerprint(manifest)));
                            }});
          }
          break;
        }
        case Ablation::kIterations: {
          auto p = with_strategy(base, core::SamplingKind::kUniform);
          p.iterations = config.max_iterations;
          std::vector<Cell> cells;
          for (int i = 1; i <= config.max_iterations; ++i) {
            cells.push_back(placeholder("iteration " + std::to_string(i), "pretrained", seed, i));
            cells.push_back(placeholder("iteration " + std::to_string(i), "finetuned", seed, i));
          }
          jobs.push_back({cells, [&ctx, p, teacher, seed] {
                            const auto res = self_train(ctx, p, teacher, "uniform", ctx.data.unlabeled);
                            return stage_cells(res, "iteration", seed, 0.0,
                                               cell_fingerprint(ctx, p, ctx.unlabeled_fingerprint), true);
                          }});
          break;
        }
        case Ablation::kClosedLoop: {
          const auto p = with_strategy(base, core::SamplingKind::kUniform);
          jobs.push_back({{placeholder("teacher", "teacher", seed)}, [&ctx, p, teacher] {
                            if (!teacher.ok) throw std::runtime_error("teacher unavailable: " + teacher.error);
                            Cell c = teacher;
                            c.row = "teacher";
                            const auto model = planner::load_checkpoint(c.checkpoint, p.planner).model;
                            return closed_loop_cells(ctx, model, c);
                          }});
          jobs.push_back({{placeholder("selfd", "finetuned", seed)}, [&ctx, p, teacher, seed] {
                            const auto res = self_train(ctx, p, teacher, "uniform", ctx.data.unlabeled);
                            Cell c = cell_from(res.final(), "selfd", seed, 0.0,
                                               cell_fingerprint(ctx, p, ctx.unlabeled_fingerprint));
                            const auto model = planner::load_checkpoint(c.checkpoint, p.planner).model;
                            return closed_loop_cells(ctx, model, c);
                          }});
          break;
        }
        case Ablation::kArchitecture: break;
      }
    }
    if (ablation == Ablation::kClosedLoop) {
      jobs.push_back({{placeholder("expert", "reference", 0)}, [&ctx] {
                        auto cl = ctx.cfg.closed_loop;
                        cl.threads = ctx.cfg.threads;
                        const metrics::ExpertPolicy expert(cl.expert);
                        Cell c = placeholder("expert", "reference", 0);
                        c.ok = true;
                        c.report = metrics::MetricsReport{};
                        c.report->split = "closed-loop";
                        c.report->closed_loop = metrics::summarize(metrics::closed_loop_eval(expert, cl));
                        c.config_fingerprint = fingerprint({{"closed_loop", cl}});
                        return std::vector<Cell>{c};
                      }});
    }
  }
  run_jobs(ctx, jobs);
  for (auto& j : jobs) {
    for (auto& c : j.cells) report.cells.push_back(std::move(c));
  }
  // Group cells by row so the table reads top to bottom; seeds stay in order within a row.
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& c : report.cells) {
    const auto key = std::make_pair(c.row, c.stage);
    if (std::find(order.begin(), order.end(), key) == order.end()) order.push_back(key);
  }
  std::stable_sort(report.cells.begin(), report.cells.end(), [&](const Cell& a, const Cell& b) {
    const auto ia = std::find(order.begin(), order.end(), std::make_pair(a.row, a.stage)) - order.begin();
    const auto ib = std::find(order.begin(), order.end(), std::make_pair(b.row, b.stage)) - order.begin();
    return ia < ib;
  });
  report.rows = summarize_rows(report.cells);
  write_report(report, root / std::string(ablation_name(ablation)));
  return report;
}

namespace {

std::string fmt(double v, int digits = 3) {
  if (!std::isfinite(v)) return "n/a";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string fmt(const std::optional<double>& v, int digits = 3) { return v ? fmt(*v, digits) : "n/a"; }

}  // namespace

std::string markdown_table(const AblationReport& report) {
  std::ostringstream os;
  os << "## " << ablation_name(report.ablation) << "\n\n"
     << "| treatment | stage | seeds ok | ADE (m) | FDE (m) | coll. rate | SR | RC | coll./10km |\n"
     << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : report.rows) {
    const auto& cl = r.closed_loop;
    os << "| " << r.row << " | " << r.stage << " | " << r.ok << "/" << r.ok + r.failed << " | " << fmt(r.ade)
       << " | " << fmt(r.fde) << " | " << fmt(r.collision_rate) << " | "
       << (cl ? fmt(cl->success_rate, 2) : "n/a") << " | " << (cl ? fmt(cl->route_completion, 2) : "n/a") << " | "
       << (cl ? fmt(cl->collisions_per_10km, 1) : "n/a") << " |\n";
  }
  os << "\nMedians over seeds. Per-cell values:\n\n"
     << "| treatment | stage | seed | status | ADE (m) | checkpoint | config |\n"
     << "|---|---|---|---|---|---|---|\n";
  for (const auto& c : report.cells) {
    os << "| " << c.row << " | " << c.stage << " | " << c.seed << " | " << (c.ok ? "ok" : "failed: " + c.error)
       << " | " << (c.report && c.report->count > 0 ? fmt(c.report->ade) : "n/a") << " | "
       << (c.checkpoint.empty() ? "-" : c.checkpoint) << " | " << c.config_fingerprint << " |\n";
  }
  return os.str();
}

std::string csv_table(const AblationReport& report) {
  std::ostringstream os;
  os << "treatment,stage,x,seeds_ok,seeds_failed,ade,fde,collision_rate,success_rate,route_completion,"
        "collisions_per_10km\n";
  for (const auto& r : report.rows) {
    const auto& cl = r.closed_loop;
    os << '"' << r.row << "\"," << r.stage << ',' << r.x << ',' << r.ok << ',' << r.failed << ',' << fmt(r.ade, 6)
       << ',' << fmt(r.fde, 6) << ',' << fmt(r.collision_rate, 6) << ','
       << (cl ? fmt(cl->success_rate, 6) : "n/a") << ',' << (cl ? fmt(cl->route_completion, 6) : "n/a") << ','
       << (cl ? fmt(cl->collisions_per_10km, 6) : "n/a") << '\n';
  }
  return os.str();
}

void write_report(const AblationReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "table.md", markdown_table(report));
  write_text(dir / "table.csv", csv_table(report));
  nlohmann::json cells = report.cells;
  write_text(dir / "cells.json", cells.dump(1) + "\n");

  const std::string name(ablation_name(report.ablation));
  std::vector<std::string> labels;
  std::vector<double> ade;
  for (const auto& r : report.rows) {
    if (r.stage == "reference") continue;
    labels.push_back(r.row + " (" + r.stage + ")");
    ade.push_back(r.ade);
  }
  write_text(dir / "ade.svg", svg_bar_chart(name + ": median eval ADE", labels, ade, "ADE (m)"));

  if (report.ablation == Ablation::kScaling || report.ablation == Ablation::kIterations) {
    Series pre{"pretrained", {}, {}}, fine{"finetuned", {}, {}}, base{"no self-training", {}, {}};
    const RowSummary* teacher = report.find("no self-training", "teacher");
    for (const auto& r : report.rows) {
      if (r.stage == "pretrained") {
        pre.x.push_back(r.x);
        pre.y.push_back(r.ade);
      } else if (r.stage == "finetuned") {
        fine.x.push_back(r.x);
        fine.y.push_back(r.ade);
      }
    }
    if (teacher) {
      base.x = fine.x;
      base.y.assign(fine.x.size(), teacher->ade);
    }
    const bool scaling = report.ablation == Ablation::kScaling;
    write_text(dir / (scaling ? "ade_vs_pool.svg" : "ade_vs_iteration.svg"),
               svg_line_chart(name + ": median eval ADE", {pre, fine, base},
                              scaling ? "unlabeled pool (frames)" : "iteration", "ADE (m)", scaling));
  }
  if (report.ablation == Ablation::kClosedLoop) {
    std::vector<std::string> rows;
    std::vector<double> sr, coll;
    for (const auto& r : report.rows) {
      rows.push_back(r.row);
      sr.push_back(r.closed_loop ? r.closed_loop->success_rate : std::numeric_limits<double>::quiet_NaN());
      coll.push_back(r.closed_loop ? r.closed_loop->collisions_per_10km : std::numeric_limits<double>::quiet_NaN());
    }
    write_text(dir / "success_rate.svg", svg_bar_chart("closed loop: success rate", rows, sr, "SR"));
    write_text(dir / "collisions.svg", svg_bar_chart("closed loop: collisions per 10 km", rows, coll, "coll./10km"));
  }
}

}  // namespace selfd::experiments
