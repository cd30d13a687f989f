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

#include "selfd/planner/ops.hpp"

namespace selfd::planner {

core::Vec2 spatial_softmax(const Eigen::MatrixXd& heatmap, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("spatial_softmax: temperature must be positive");
  if (heatmap.size() == 0) throw std::invalid_argument("spatial_softmax: empty heatmap");
  if (!heatmap.allFinite()) throw NonFiniteError("spatial_softmax: non-finite scores");
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = heatmap;
  std::vector<double> probs(static_cast<std::size_t>(rm.size()));
  double u = 0.0, v = 0.0;
  softmax_expectation<double>(rm.data(), static_cast<int>(rm.cols()), static_cast<int>(rm.rows()), temperature,
                              probs.data(), u, v);
  return {u, v};
}

std::vector<core::Vec2> project_to_bev(std::span<const core::Vec2> image_points, const ProjectionStack& stack) {
  Eigen::VectorXd x(2 * image_points.size());
  for (std::size_t k = 0; k < image_points.size(); ++k) {
    x[2 * k] = image_points[k].x;
    x[2 * k + 1] = image_points[k].y;
  }
  if (stack.w1.cols() != x.size()) throw std::invalid_argument("project_to_bev: point count does not match stack");
  const Eigen::VectorXd h1 = (stack.w1 * x + stack.b1).cwiseMax(0.0);
  const Eigen::VectorXd h2 = (stack.w2 * h1 + stack.b2).cwiseMax(0.0);
  const Eigen::VectorXd y = stack.output_scale * (stack.w3 * h2 + stack.b3);
  std::vector<core::Vec2> out(image_points.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {y[2 * k], y[2 * k + 1]};
  return out;
}

std::vector<core::Vec2> project_to_bev(std::span<const core::Vec2> image_points, core::Command command,
                                       std::span<const ProjectionStack> stacks) {
  if (stacks.empty()) throw std::invalid_argument("project_to_bev: no projection stacks");
  const ProjectionStack& s = stacks.size() == 1 ? stacks[0] : stacks[core::command_index(command)];
  return project_to_bev(image_points, s);
}

LossBreakdown compute_loss(const core::WaypointPlan& pred, const core::WaypointPlan& target, int quality_target,
                           double lambda) {
  if (pred.size() != target.size() || pred.size() == 0) {
    throw std::invalid_argument("compute_loss: waypoint count mismatch");
  }
  if (lambda < 0.0) throw std::invalid_argument("compute_loss: lambda must be non-negative");
  LossBreakdown out;
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    sum += std::abs(pred.waypoints[k].x - target.waypoints[k].x);
    sum += std::abs(pred.waypoints[k].y - target.waypoints[k].y);
  }
  out.plan = sum / (2.0 * static_cast<double>(pred.size()));
  const double s = std::clamp(pred.quality, kBceEpsilon, 1.0 - kBceEpsilon);
  const double t = static_cast<double>(quality_target);
  out.quality = -(t * std::log(s) + (1.0 - t) * std::log(1.0 - s));
  out.total = out.plan + lambda * out.quality;
  return out;
}

int quality_target_for(double error_m, double threshold_m) {
  if (!(threshold_m > 0.0)) throw std::invalid_argument("quality threshold must be positive");
  return error_m <= threshold_m ? 1 : 0;
}

}  // namespace selfd::planner
