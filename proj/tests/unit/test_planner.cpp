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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "selfd/planner/checkpoint.hpp"
#include "selfd/planner/network.hpp"
#include "selfd/planner/ops.hpp"
#include "test_support.hpp"

using namespace selfd;
using planner::PlannerNet;
using planner::Variant;

namespace {

// Independent oracle: plain double loops, no shared code with the kernel.
core::Vec2 softmax_oracle(const Eigen::MatrixXd& h, double temp) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < h.rows(); ++i)
    for (int j = 0; j < h.cols(); ++j) mx = std::max(mx, h(i, j));
  double z = 0.0, u = 0.0, v = 0.0;
  for (int i = 0; i < h.rows(); ++i) {
    for (int j = 0; j < h.cols(); ++j) {
      const double w = std::exp((h(i, j) - mx) / temp);
      z += w;
      u += w * (j + 0.5) / h.cols();
      v += w * (i + 0.5) / h.rows();
    }
  }
  return {u / z, v / z};
}

std::vector<core::Vec2> projection_oracle(const std::vector<core::Vec2>& pts, const planner::ProjectionStack& s) {
  const int in = static_cast<int>(2 * pts.size());
  std::vector<double> x(in);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    x[2 * k] = pts[k].x;
    x[2 * k + 1] = pts[k].y;
  }
  auto layer = [](const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const std::vector<double>& v, bool relu) {
    std::vector<double> out(w.rows());
    for (int r = 0; r < w.rows(); ++r) {
      double acc = b[r];
      for (int c = 0; c < w.cols(); ++c) acc += w(r, c) * v[c];
      out[r] = relu ? std::max(0.0, acc) : acc;
    }
    return out;
  };
  const auto h1 = layer(s.w1, s.b1, x, true);
  const auto h2 = layer(s.w2, s.b2, h1, true);
  const auto y = layer(s.w3, s.b3, h2, false);
  std::vector<core::Vec2> out(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) out[k] = {s.output_scale * y[2 * k], s.output_scale * y[2 * k + 1]};
  return out;
}

double loss_oracle(const core::WaypointPlan& p, const core::WaypointPlan& t, int q, double lambda) {
  double acc = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += std::fabs(p.waypoints[k].x - t.waypoints[k].x);
    acc += std::fabs(p.waypoints[k].y - t.waypoints[k].y);
    n += 2;
  }
  const double s = p.quality;
  const double bce = q == 1 ? -std::log(s) : -std::log(1.0 - s);
  return acc / n + lambda * bce;
}

planner::ProjectionStack random_stack(int k, int hidden, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 0.7);
  planner::ProjectionStack s;
  auto fill = [&](Eigen::MatrixXd& m, int r, int c) {
    m.resize(r, c);
    for (int i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  };
  auto fillv = [&](Eigen::VectorXd& v, int r) {
    v.resize(r);
    for (int i = 0; i < r; ++i) v[i] = nd(rng);
  };
  fill(s.w1, hidden, 2 * k);
  fillv(s.b1, hidden);
  fill(s.w2, hidden, hidden);
  fillv(s.b2, hidden);
  fill(s.w3, 2 * k, hidden);
  fillv(s.b3, 2 * k);
  s.output_scale = 3.0;
  return s;
}

template <typename T>
planner::Batch<T> make_batch(const planner::PlannerConfig& cfg, int n, std::mt19937_64& rng) {
  planner::Batch<T> b;
  b.images.resize(3, static_cast<Eigen::Index>(n) * cfg.input_width * cfg.input_height);
  std::uniform_real_distribution<double> speed(0.0, 12.0);
  for (int s = 0; s < n; ++s) {
    planner::pack_image<T>(testing::random_image(cfg.input_width, cfg.input_height, rng), s, b.images);
    b.speeds.push_back(speed(rng));
    b.commands.push_back(core::kAllCommands[s % 3]);
    auto t = testing::random_plan(cfg.num_waypoints, rng, 6.0);
    for (auto& w : t.waypoints) w.x = std::abs(w.x) + 2.0;  // in front of the camera
    b.targets.push_back(t);
    b.quality_targets.push_back(s % 2);
  }
  return b;
}

double flat_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Central finite differences over every parameter entry.
double gradient_relative_error(PlannerNet<double>& net, const planner::Batch<double>& batch, double lambda) {
  planner::LossOptions opt;
  opt.lambda = lambda;
  net.forward_backward(batch, opt, nullptr);
  std::vector<double> analytic, numeric;
  for (auto& p : net.parameters()) {
    for (Eigen::Index i = 0; i < p.grad.size(); ++i) analytic.push_back(p.grad.data()[i]);
  }
  const double eps = 1e-4;
  for (auto& p : net.parameters()) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double orig = p.value.data()[i];
      p.value.data()[i] = orig + eps;
      const double lp = net.forward_backward(batch, opt, nullptr).loss;
      p.value.data()[i] = orig - eps;
      const double lm = net.forward_backward(batch, opt, nullptr).loss;
      p.value.data()[i] = orig;
      numeric.push_back((lp - lm) / (2 * eps));
    }
  }
  std::vector<double> diff(analytic.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = analytic[i] - numeric[i];
  return flat_norm(diff) / std::max(flat_norm(analytic), flat_norm(numeric));
}

}  // namespace

TEST_CASE("spatial softmax: uniform heatmap gives the center") {
  const Eigen::MatrixXd h = Eigen::MatrixXd::Constant(5, 7, 0.3);
  const auto p = planner::spatial_softmax(h, 1.0);
  CHECK(p.x == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.y == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("spatial softmax: a spike at low temperature lands on its cell") {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(4, 6);
  h(3, 1) = 5.0;
  const auto p = planner::spatial_softmax(h, 1e-3);
  CHECK(std::abs(p.x - 1.5 / 6.0) < 1e-3);
  CHECK(std::abs(p.y - 3.5 / 4.0) < 1e-3);
}

TEST_CASE("spatial softmax: 2x2 example matches the summation oracle") {
  Eigen::MatrixXd h(2, 2);
  h << 0, 1, 2, 3;
  // exp weights e^0, e^1, e^2, e^3 over centers (.25,.25), (.75,.25), (.25,.75), (.75,.75).
  const double z = 1 + std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  const double u = (0.25 * (1 + std::exp(2.0)) + 0.75 * (std::exp(1.0) + std::exp(3.0))) / z;
  const double v = (0.25 * (1 + std::exp(1.0)) + 0.75 * (std::exp(2.0) + std::exp(3.0))) / z;
  const auto p = planner::spatial_softmax(h, 1.0);
  CHECK(std::abs(p.x - u) < 1e-12);
  CHECK(std::abs(p.y - v) < 1e-12);
}

TEST_CASE("spatial softmax: randomized cases match the oracle and stay inside the grid") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dim(1, 9);
  std::normal_distribution<double> nd(0.0, 3.0);
  std::uniform_real_distribution<double> temp(0.05, 4.0);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::MatrixXd h(dim(rng), dim(rng));
    for (int i = 0; i < h.size(); ++i) h.data()[i] = nd(rng);
    const double t = temp(rng);
    const auto p = planner::spatial_softmax(h, t);
    const auto o = softmax_oracle(h, t);
    REQUIRE(std::abs(p.x - o.x) < 1e-9);
    REQUIRE(std::abs(p.y - o.y) < 1e-9);
    REQUIRE(p.x >= 0.5 / h.cols() - 1e-12);
    REQUIRE(p.x <= 1.0 - 0.5 / h.cols() + 1e-12);
    REQUIRE(p.y >= 0.5 / h.rows() - 1e-12);
    REQUIRE(p.y <= 1.0 - 0.5 / h.rows() + 1e-12);
  }
}

TEST_CASE("spatial softmax rejects non-finite scores") {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2, 2);
  h(0, 1) = std::nan("");
  CHECK_THROWS_AS(planner::spatial_softmax(h, 1.0), planner::NonFiniteError);
}

TEST_CASE("projection: zeroed hidden layers return the output bias") {
  const int K = 4, P = 6;
  planner::ProjectionStack s;
  s.w1 = Eigen::MatrixXd::Zero(P, 2 * K);
  s.b1 = Eigen::VectorXd::Zero(P);
  s.w2 = Eigen::MatrixXd::Zero(P, P);
  s.b2 = Eigen::VectorXd::Zero(P);
  s.w3 = Eigen::MatrixXd::Identity(2 * K, P);
  s.b3 = Eigen::VectorXd::LinSpaced(2 * K, -3.0, 4.0);
  s.output_scale = 1.0;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<core::Vec2> pts(K);
    for (auto& p : pts) p = {uni(rng), uni(rng)};
    const auto out = planner::project_to_bev(pts, s);
    for (int k = 0; k < K; ++k) {
      CHECK(out[k].x == s.b3[2 * k]);
      CHECK(out[k].y == s.b3[2 * k + 1]);
    }
  }
}

TEST_CASE("projection: command selects distinct stacks and matches the recomputation oracle") {
  std::mt19937_64 rng(3);
  const int K = 5;
  std::vector<planner::ProjectionStack> stacks = {random_stack(K, 8, rng), random_stack(K, 8, rng),
                                                  random_stack(K, 8, rng)};
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<core::Vec2> pts(K);
    for (auto& p : pts) p = {uni(rng), uni(rng)};
    const core::Command c = core::kAllCommands[trial % 3];
    const auto out = planner::project_to_bev(pts, c, stacks);
    const auto ref = projection_oracle(pts, stacks[core::command_index(c)]);
    for (int k = 0; k < K; ++k) {
      REQUIRE(std::abs(out[k].x - ref[k].x) < 1e-9);
      REQUIRE(std::abs(out[k].y - ref[k].y) < 1e-9);
    }
  }
  std::vector<core::Vec2> pts(K, {0.4, 0.6});
  const auto left = planner::project_to_bev(pts, core::Command::kLeft, stacks);
  const auto right = planner::project_to_bev(pts, core::Command::kRight, stacks);
  CHECK(left != right);
}

TEST_CASE("loss: identity and unit offset") {
  core::WaypointPlan t{{{1, 2}, {3, 4}, {5, 6}}, 1.0};
  auto id = planner::compute_loss(t, t, 1, 0.1);
  CHECK(id.plan == 0.0);
  CHECK(id.quality < 1e-6);

  core::WaypointPlan p = t;
  for (auto& w : p.waypoints) w.x += 1.0;
  auto off = planner::compute_loss(p, t, 1, 0.0);
  CHECK(off.total == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("loss: randomized cases match the loop oracle, are non-negative and translation covariant") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> q(0.001, 0.999), lam(0.0, 2.0), sh(-20.0, 20.0);
  for (int trial = 0; trial < 1000; ++trial) {
    auto p = testing::random_plan(5, rng);
    const auto t = testing::random_plan(5, rng);
    p.quality = q(rng);
    const int qt = trial % 2;
    const double l = lam(rng);
    const auto got = planner::compute_loss(p, t, qt, l);
    REQUIRE(std::abs(got.total - loss_oracle(p, t, qt, l)) < 1e-9);
    REQUIRE(got.total >= 0.0);
    const core::Vec2 d{sh(rng), sh(rng)};
    auto p2 = p, t2 = t;
    for (auto& w : p2.waypoints) w = w + d;
    for (auto& w : t2.waypoints) w = w + d;
    REQUIRE(std::abs(planner::compute_loss(p2, t2, qt, l).plan - got.plan) < 1e-9);
  }
}

TEST_CASE("loss: quality outside the open interval stays finite") {
  core::WaypointPlan t{{{1, 2}}, 1.0};
  core::WaypointPlan p = t;
  p.quality = 0.0;
  const auto r = planner::compute_loss(p, t, 1, 1.0);
  CHECK(std::isfinite(r.total));
  CHECK(r.quality == doctest::Approx(-std::log(planner::kBceEpsilon)));
}

TEST_CASE("quality target: inclusive threshold") {
  CHECK(planner::quality_target_for(0.0, 1.0) == 1);
  CHECK(planner::quality_target_for(1.0, 1.0) == 1);
  CHECK(planner::quality_target_for(1.0 + 1e-12, 1.0) == 0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> e(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double err = e(rng);
    REQUIRE(planner::quality_target_for(err, 1.3) == (err <= 1.3 ? 1 : 0));
  }
  CHECK_THROWS(planner::quality_target_for(0.5, 0.0));
}

TEST_CASE("forward: shape, range and determinism") {
  std::mt19937_64 rng(2);
  for (Variant v : {Variant::kImagePlaneHomography, Variant::kSingleBranchBev, Variant::kMultiBranchBev}) {
    const auto cfg = testing::tiny_config(v);
    planner::Planner net(cfg, 9);
    core::Observation obs{testing::random_image(cfg.input_width, cfg.input_height, rng), 4.0, core::Command::kLeft};
    const auto a = net.forward(obs);
    const auto b = net.forward(obs);
    CHECK(a.size() == static_cast<std::size_t>(cfg.num_waypoints));
    CHECK(a.quality >= 0.0);
    CHECK(a.quality <= 1.0);
    CHECK(a == b);
  }
}

TEST_CASE("forward: resolution mismatch is an error") {
  planner::Planner net(testing::tiny_config(), 1);
  core::Observation obs{core::Image(10, 10), 1.0, core::Command::kForward};
  CHECK_THROWS_AS(net.forward(obs), std::invalid_argument);
}

TEST_CASE("forward: non-selected branch parameters cannot change the output") {
  std::mt19937_64 rng(4);
  for (Variant v : {Variant::kSingleBranchBev, Variant::kMultiBranchBev}) {
    const auto cfg = testing::tiny_config(v);
    planner::Planner net(cfg, 21);
    const auto img = testing::random_image(cfg.input_width, cfg.input_height, rng);
    for (int c = 0; c < 3; ++c) {
      core::Observation obs{img, 5.0, core::kAllCommands[c]};
      const auto before = net.forward(obs);
      for (int other = 0; other < 3; ++other) {
        if (other == c) continue;
        planner::Planner perturbed = net;
        std::normal_distribution<float> nd(0.0f, 1.0f);
        for (const auto& slice : perturbed.branch_parameters(other)) {
          auto& p = perturbed.parameter(slice.parameter);
          for (int r = slice.row_begin; r < slice.row_end; ++r)
            for (int col = 0; col < p.value.cols(); ++col) p.value(r, col) += nd(rng);
        }
        CHECK(perturbed.forward(obs) == before);
      }
    }
    core::Observation left{img, 5.0, core::Command::kLeft}, right{img, 5.0, core::Command::kRight};
    CHECK(net.forward(left) != net.forward(right));
  }
}

TEST_CASE("forward: learned variants agree with the standalone projection op") {
  std::mt19937_64 rng(8);
  const auto cfg = testing::tiny_config(Variant::kMultiBranchBev);
  planner::Planner net(cfg, 5);
  const auto img = testing::random_image(cfg.input_width, cfg.input_height, rng);
  const auto feats = net.encode(img);
  for (core::Command c : core::kAllCommands) {
    const auto pts = net.image_points(feats, 3.0, c);
    const auto plan = net.decode(feats, 3.0, c);
    const auto ref = planner::project_to_bev(pts, net.projection_stack(c));
    for (std::size_t k = 0; k < pts.size(); ++k) {
      CHECK(plan.waypoints[k].x == doctest::Approx(ref[k].x).epsilon(1e-4));
      CHECK(plan.waypoints[k].y == doctest::Approx(ref[k].y).epsilon(1e-4));
    }
  }
}

TEST_CASE("gradients match central finite differences in double precision") {
  for (Variant v : {Variant::kImagePlaneHomography, Variant::kSingleBranchBev, Variant::kMultiBranchBev}) {
    for (int up : {1, 2}) {
      auto cfg = testing::tiny_config(v);
      cfg.decoder_upsample = up;
      // Fixed data seed: random batches occasionally put a ReLU input within eps of zero.
      std::mt19937_64 rng(110);
      PlannerNet<double> net(cfg, 17);
      const auto batch = make_batch<double>(cfg, 4, rng);
      const double rel = gradient_relative_error(net, batch, 0.7);
      INFO("variant " << planner::variant_name(v) << " upsample " << up << " rel " << rel);
      CHECK(rel <= 1e-4);
    }
  }
}

TEST_CASE("lambda = 0 leaves the quality head without gradient") {
  const auto cfg = testing::tiny_config();
  std::mt19937_64 rng(12);
  PlannerNet<double> net(cfg, 3);
  auto batch = make_batch<double>(cfg, 6, rng);
  planner::LossOptions opt;
  opt.lambda = 0.0;
  net.forward_backward(batch, opt, nullptr);
  CHECK(net.parameter("quality.weight").grad.cwiseAbs().maxCoeff() == 0.0);
  CHECK(net.parameter("quality.bias").grad.cwiseAbs().maxCoeff() == 0.0);
  opt.lambda = 0.5;
  net.forward_backward(batch, opt, nullptr);
  CHECK(net.parameter("quality.weight").grad.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("checkpoint round trip and config mismatch") {
  const auto dir = testing::scratch_dir("ckpt");
  const auto cfg = testing::tiny_config();
  planner::Planner net(cfg, 77);
  planner::save_checkpoint(dir / "m.ckpt", net, {12, "teacher"});
  const auto loaded = planner::load_checkpoint(dir / "m.ckpt", cfg);
  CHECK(loaded.model.fingerprint() == net.fingerprint());
  CHECK(loaded.meta.step == 12);
  CHECK(loaded.meta.tag == "teacher");
  auto other = cfg;
  other.latent_dim += 1;
  CHECK_THROWS_AS(planner::load_checkpoint(dir / "m.ckpt", other), planner::CheckpointError);
}

TEST_CASE("parameter count is reported and initialization depends on the seed") {
  const auto cfg = testing::tiny_config();
  planner::Planner a(cfg, 1), b(cfg, 2);
  CHECK(a.parameter_count() > 0);
  CHECK(a.fingerprint() != b.fingerprint());
  CHECK(planner::Planner(cfg, 1).fingerprint() == a.fingerprint());
}
