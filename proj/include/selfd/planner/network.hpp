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
#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfd/core/types.hpp"
#include "selfd/planner/config.hpp"
#include "selfd/planner/ops.hpp"

namespace selfd::planner {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
};

/// A mini-batch in network layout. `images` is 3 x (N*H*W): one row per color channel,
/// samples concatenated, each sample row-major, intensities already centered (x - 0.5).
template <typename T>
struct Batch {
  Matrix<T> images;
  std::vector<double> speeds;
  std::vector<core::Command> commands;
  std::vector<core::WaypointPlan> targets;
  std::vector<int> quality_targets;  // optional; empty = threshold rule on the current error

  int size() const { return static_cast<int>(speeds.size()); }
};

/// Appends one image to a batch under construction (images must be sized 3 x (capacity*H*W)).
template <typename T>
void pack_image(const core::Image& image, int slot, Matrix<T>& images);

struct LossOptions {
  double lambda = 0.1;
  double quality_threshold = 1.0;  // meters of ADE
};

struct BatchStats {
  double loss = 0.0;
  double plan_loss = 0.0;
  double quality_loss = 0.0;
  double ade = 0.0;  // BEV meters, mean over the batch
  int count = 0;
};

/// Conditional monocular-to-BEV waypoint network.
///
/// Image -> strided conv encoder -> (features, speed) -> global latent and a spatial decoder ->
/// per-branch heatmaps -> spatial softmax -> command-selected image-plane points -> BEV points
/// (learned per-branch / shared projection stack, or a fixed ground homography). A quality head on
/// the latent predicts one logit per branch. Only the branch named by the command affects the output.
template <typename T>
class PlannerNet {
 public:
  PlannerNet(PlannerConfig config, std::uint64_t seed);

  const PlannerConfig& config() const { return config_; }
  std::vector<Parameter<T>>& parameters() { return params_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  Parameter<T>& parameter(std::string_view name);
  const Parameter<T>& parameter(std::string_view name) const;
  std::size_t parameter_count() const;
  std::uint64_t fingerprint() const;
  void zero_grad();

  /// Encoder output for one image: feature_channels x (feature_height * feature_width).
  struct Features {
    Matrix<T> map;
  };

  Features encode(const core::Image& image) const;
  core::WaypointPlan decode(const Features& features, double speed, core::Command command) const;
  /// Deterministic inference (dropout off). Throws on resolution mismatch or non-finite output.
  core::WaypointPlan forward(const core::Observation& obs) const;
  /// Command-selected normalized image-plane points (before projection).
  std::vector<core::Vec2> image_points(const Features& features, double speed, core::Command command) const;

  /// Training step: zeroes and fills every parameter gradient, returns the batch loss.
  /// Dropout masks are drawn from `rng` when it is non-null.
  BatchStats forward_backward(const Batch<T>& batch, const LossOptions& options, std::mt19937_64* rng);

  /// Batched forward without gradients; dropout when `rng` is non-null.
  std::vector<core::WaypointPlan> forward_batch(const Batch<T>& batch, std::mt19937_64* rng) const;

  /// Copy of the projection stack used for `command` (learned variants only).
  ProjectionStack projection_stack(core::Command command) const;

  struct BranchSlice {
    std::string parameter;
    int row_begin = 0;
    int row_end = 0;
  };
  /// Parameter rows owned exclusively by one conditional branch.
  std::vector<BranchSlice> branch_parameters(int branch) const;

  /// Image-plane target used for the homography variant: the target BEV points projected through
  /// the calibrated camera, clamped to the reachable heatmap range.
  std::vector<core::Vec2> image_plane_target(const core::WaypointPlan& target) const;
  /// BEV points from normalized image points through the calibrated homography.
  std::vector<core::Vec2> homography_to_bev(std::span<const core::Vec2> image_points) const;

 private:
  struct Workspace;

  void add_parameter(std::string name, int rows, int cols, double init_bound, std::mt19937_64& rng);
  int index_of(std::string_view name) const;
  void run_encoder(const Matrix<T>& images, int n, Workspace& ws) const;
  void run_head(const std::vector<double>& speeds, const std::vector<core::Command>& commands, Workspace& ws,
                std::mt19937_64* rng) const;
  std::vector<core::WaypointPlan> collect_plans(const Workspace& ws) const;
  // d_out is the loss gradient w.r.t. BEV points (learned variants) or image points (homography).
  void backward(Workspace& ws, const Matrix<T>& d_out, const std::vector<T>& d_logit);

  PlannerConfig config_;
  std::vector<Parameter<T>> params_;
  // Parameter indices, resolved once.
  std::vector<int> enc_w_, enc_b_;
  int trunk_w_ = -1, trunk_b_ = -1, global_w_ = -1, global_b_ = -1, dec_w_ = -1, dec_b_ = -1;
  int heat_w_ = -1, heat_b_ = -1, qual_w_ = -1, qual_b_ = -1;
  std::vector<std::array<int, 6>> proj_;  // per stack: w1 b1 w2 b2 w3 b3
};

extern template class PlannerNet<float>;
extern template class PlannerNet<double>;

using Planner = PlannerNet<float>;

}  // namespace selfd::planner
