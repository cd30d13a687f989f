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

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "selfd/core/types.hpp"

namespace selfd::planner {

/// Raised when an activation, output or loss is NaN or infinite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Softmax-weighted expected cell center over one heatmap stored row-major (height x width).
/// Writes the probabilities to `probs` (same layout). Coordinates are normalized to [0, 1]:
/// cell (i, j) has center ((j + 0.5) / width, (i + 0.5) / height).
template <typename T>
void softmax_expectation(const T* scores, int width, int height, T temperature, T* probs, T& u, T& v) {
  const int n = width * height;
  T max_score = scores[0];
  for (int i = 1; i < n; ++i) max_score = std::max(max_score, scores[i]);
  T sum = 0;
  for (int i = 0; i < n; ++i) {
    probs[i] = std::exp((scores[i] - max_score) / temperature);
    sum += probs[i];
  }
  const T inv = T(1) / sum;
  T su = 0, sv = 0;
  for (int i = 0; i < height; ++i) {
    T row = 0;
    for (int j = 0; j < width; ++j) {
      T& p = probs[i * width + j];
      p *= inv;
      row += p;
      su += p * (T(j) + T(0.5));
    }
    sv += row * (T(i) + T(0.5));
  }
  u = su / T(width);
  v = sv / T(height);
}

/// Expected normalized coordinate of a heatmap (rows = height) under softmax(scores / temperature).
core::Vec2 spatial_softmax(const Eigen::MatrixXd& heatmap, double temperature);

/// Three affine layers (ReLU after the first two); output scaled to meters.
struct ProjectionStack {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;
  double output_scale = 1.0;
};

/// Maps K normalized image points to K BEV points (meters) with one projection stack.
std::vector<core::Vec2> project_to_bev(std::span<const core::Vec2> image_points, const ProjectionStack& stack);

/// Command-selected projection: `stacks` holds one stack per command, or a single shared stack.
std::vector<core::Vec2> project_to_bev(std::span<const core::Vec2> image_points, core::Command command,
                                       std::span<const ProjectionStack> stacks);

struct LossBreakdown {
  double total = 0.0;
  double plan = 0.0;
  double quality = 0.0;
};

/// Quality estimates are clamped to [kBceEpsilon, 1 - kBceEpsilon] before the log.
inline constexpr double kBceEpsilon = 1e-7;

/// L_plan is the mean absolute difference over all K waypoints and both coordinates;
/// L_quality is the binary cross-entropy of pred.quality against `quality_target`.
LossBreakdown compute_loss(const core::WaypointPlan& pred, const core::WaypointPlan& target, int quality_target,
                           double lambda);

/// 1 when the plan error is within the threshold (inclusive), else 0.
int quality_target_for(double error_m, double threshold_m);

/// Numerically safe BCE from a logit: softplus(z) - t * z.
inline double bce_with_logit(double logit, double target) {
  const double softplus = logit > 0 ? logit + std::log1p(std::exp(-logit)) : std::log1p(std::exp(logit));
  return softplus - target * logit;
}

}  // namespace selfd::planner
