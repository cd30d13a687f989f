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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <memory>
#include <string>

#include "selfd/core/image_io.hpp"
#include "selfd/metrics/closed_loop.hpp"
#include "selfd/metrics/open_loop.hpp"
#include "selfd/metrics/report.hpp"
#include "selfd/planner/checkpoint.hpp"
#include "selfd/planner/ops.hpp"
#include "selfd/sim/dataset.hpp"
#include "selfd/sim/dynamics.hpp"
#include "selfd/train/data.hpp"
#include "selfd/train/selfd.hpp"

namespace py = pybind11;
using namespace selfd;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Structured values cross the boundary as JSON text; the Python package wraps them in dicts.
template <typename T>
T parse(const std::string& text) {
  return text.empty() ? T{} : nlohmann::json::parse(text).get<T>();
}

core::Image to_image(const FloatArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw std::invalid_argument("image must have shape (height, width, 3)");
  core::Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.data.data(), a.data(), img.data.size() * sizeof(float));
  return img;
}

FloatArray from_image(const core::Image& img) {
  FloatArray out({img.height, img.width, 3});
  std::memcpy(out.mutable_data(), img.data.data(), img.data.size() * sizeof(float));
  return out;
}

core::WaypointPlan to_plan(const DoubleArray& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw std::invalid_argument("plan must have shape (K, 2)");
  core::WaypointPlan p;
  for (py::ssize_t k = 0; k < a.shape(0); ++k) p.waypoints.push_back({a.at(k, 0), a.at(k, 1)});
  return p;
}

DoubleArray from_plan(const core::WaypointPlan& p) {
  DoubleArray out({static_cast<py::ssize_t>(p.waypoints.size()), py::ssize_t{2}});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t k = 0; k < p.waypoints.size(); ++k) {
    m(k, 0) = p.waypoints[k].x;
    m(k, 1) = p.waypoints[k].y;
  }
  return out;
}

std::string artifact_json(const train::StageArtifact& a) {
  nlohmann::json j{{"stage", a.stage},
                   {"iteration", a.iteration},
                   {"checkpoint", a.checkpoint.string()},
                   {"model_id", a.model_id},
                   {"init_model_id", a.init_model_id},
                   {"cached", a.cached}};
  if (a.eval) j["eval"] = *a.eval;
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the selfd driving-policy toolkit";

  py::enum_<core::Command>(m, "Command")
      .value("LEFT", core::Command::kLeft)
      .value("FORWARD", core::Command::kForward)
      .value("RIGHT", core::Command::kRight);

  m.def("ade", [](const DoubleArray& a, const DoubleArray& b) { return metrics::ade(to_plan(a), to_plan(b)); });
  m.def("fde", [](const DoubleArray& a, const DoubleArray& b) { return metrics::fde(to_plan(a), to_plan(b)); });
  m.def(
      "spatial_softmax",
      [](const DoubleArray& h, double temperature) {
        if (h.ndim() != 2) throw std::invalid_argument("heatmap must be 2-D");
        Eigen::MatrixXd mat(h.shape(0), h.shape(1));
        for (py::ssize_t i = 0; i < h.shape(0); ++i)
          for (py::ssize_t j = 0; j < h.shape(1); ++j) mat(i, j) = h.at(i, j);
        const auto p = planner::spatial_softmax(mat, temperature);
        return py::make_tuple(p.x, p.y);
      },
      py::arg("heatmap"), py::arg("temperature") = 1.0);
  m.def("turning_radius", [](double steer) { return sim::turning_radius(steer, sim::VehicleParams{}); });

  m.def("read_ppm", [](const std::filesystem::path& p) { return from_image(core::read_ppm(p)); });
  m.def("write_ppm", [](const std::filesystem::path& p, const FloatArray& a) { core::write_ppm(p, to_image(a)); });

  py::class_<planner::Planner>(m, "Planner")
      .def(py::init([](const std::string& config_json, std::uint64_t seed) {
             return planner::Planner(parse<planner::PlannerConfig>(config_json), seed);
           }),
           py::arg("config_json") = "", py::arg("seed") = 1)
      .def_static("load", [](const std::filesystem::path& p) { return planner::load_checkpoint(p).model; })
      .def("forward",
           [](const planner::Planner& net, const FloatArray& image, double speed, core::Command command) {
             const auto plan = net.forward({to_image(image), speed, command});
             return py::make_tuple(from_plan(plan), plan.quality);
           })
      .def_property_readonly("parameter_count", &planner::Planner::parameter_count)
      .def_property_readonly("model_id", [](const planner::Planner& net) { return planner::model_id(net); })
      .def_property_readonly("config_json",
                             [](const planner::Planner& net) { return nlohmann::json(net.config()).dump(); })
      .def_property_readonly("input_size", [](const planner::Planner& net) {
        return py::make_tuple(net.config().input_width, net.config().input_height);
      });

  m.def(
      "generate_dataset",
      [](const std::string& config_json, const std::filesystem::path& out) {
        const auto cfg = parse<sim::DatasetConfig>(config_json);
        py::gil_scoped_release release;
        const auto r = sim::generate_dataset(cfg, out);
        return nlohmann::json{{"labeled", r.labeled.string()},
                              {"unlabeled", r.unlabeled.string()},
                              {"eval", r.eval.string()},
                              {"labeled_frames", r.labeled_frames},
                              {"unlabeled_frames", r.unlabeled_frames},
                              {"eval_frames", r.eval_frames},
                              {"expert_collisions", r.expert_collisions}}
            .dump();
      },
      py::arg("config_json"), py::arg("out_dir"));

  m.def(
      "run_selfd",
      [](const std::filesystem::path& labeled, const std::filesystem::path& unlabeled, const std::string& config_json,
         const std::filesystem::path& out, const std::filesystem::path& eval_manifest) {
        const auto cfg = parse<train::SelfDConfig>(config_json);
        py::gil_scoped_release release;
        std::unique_ptr<train::TrainingSet> eval;
        if (!eval_manifest.empty()) eval = std::make_unique<train::TrainingSet>(train::load_labeled_set(eval_manifest));
        const auto r = train::run_selfd(labeled, unlabeled, cfg, out, eval.get());
        nlohmann::json stages = nlohmann::json::array();
        for (const auto& a : r.checkpoints) stages.push_back(nlohmann::json::parse(artifact_json(a)));
        return stages.dump();
      },
      py::arg("labeled"), py::arg("unlabeled"), py::arg("config_json"), py::arg("out_dir"),
      py::arg("eval_manifest") = std::filesystem::path{});

  m.def(
      "evaluate",
      [](const planner::Planner& net, const std::filesystem::path& manifest) {
        py::gil_scoped_release release;
        return nlohmann::json(train::evaluate_open_loop(net, train::load_labeled_set(manifest))).dump();
      },
      py::arg("model"), py::arg("manifest"));

  m.def(
      "closed_loop",
      [](const planner::Planner* net, const std::string& config_json) {
        auto cfg = parse<metrics::ClosedLoopConfig>(config_json);
        py::gil_scoped_release release;
        metrics::ClosedLoopReport report;
        if (net) {
          cfg.camera.width = net->config().input_width;
          cfg.camera.height = net->config().input_height;
          report = metrics::closed_loop_eval(metrics::ModelPolicy(*net), cfg);
        } else {
          report = metrics::closed_loop_eval(metrics::ExpertPolicy(cfg.expert), cfg);
        }
        return nlohmann::json(metrics::summarize(report)).dump();
      },
      py::arg("model").none(true), py::arg("config_json") = "");
}
