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

#include "selfd/planner/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace selfd::planner {
namespace {

constexpr const char* kStackNames[3] = {"left", "forward", "right"};

// Batch activations are large, short-lived buffers. glibc serves them with mmap by default and
// returns them on free, which makes every step pay page faults.
void keep_large_buffers_in_heap() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
  });
#endif
}

// Activations are stored channel-major: row = channel, column = (sample, y, x).
template <typename T>
void im2col(const Matrix<T>& in, int n, int channels, int h, int w, int stride, int ho, int wo, Matrix<T>& col) {
  col.resize(channels * 9, static_cast<Eigen::Index>(n) * ho * wo);
  for (int c = 0; c < channels; ++c) {
    const T* src = in.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col.row((c * 3 + ky) * 3 + kx).data();
        for (int s = 0; s < n; ++s) {
          for (int oy = 0; oy < ho; ++oy) {
            T* out = dst + (static_cast<std::size_t>(s) * ho + oy) * wo;
            const int iy = oy * stride - 1 + ky;
            if (iy < 0 || iy >= h) {
              std::fill(out, out + wo, T(0));
              continue;
            }
            const T* row = src + (static_cast<std::size_t>(s) * h + iy) * w;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride - 1 + kx;
              out[ox] = (ix >= 0 && ix < w) ? row[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const Matrix<T>& col, int n, int channels, int h, int w, int stride, int ho, int wo, Matrix<T>& out) {
  out.setZero(channels, static_cast<Eigen::Index>(n) * h * w);
  for (int c = 0; c < channels; ++c) {
    T* dst = out.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col.row((c * 3 + ky) * 3 + kx).data();
        for (int s = 0; s < n; ++s) {
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride - 1 + ky;
            if (iy < 0 || iy >= h) continue;
            const T* in = src + (static_cast<std::size_t>(s) * ho + oy) * wo;
            T* row = dst + (static_cast<std::size_t>(s) * h + iy) * w;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride - 1 + kx;
              if (ix >= 0 && ix < w) row[ix] += in[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void affine(const Matrix<T>& w, const Matrix<T>& b, const Matrix<T>& x, Matrix<T>& out) {
  out.noalias() = w * x;
  out.colwise() += b.col(0);
}

template <typename T>
Matrix<T> relu_grad(const Matrix<T>& d, const Matrix<T>& pre) {
  return (pre.array() > T(0)).select(d, T(0));
}

template <typename T>
void draw_dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng, Matrix<T>& mask) {
  mask.resize(rows, cols);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const T keep_scale = T(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = uni(rng) < rate ? T(0) : keep_scale;
}

}  // namespace

template <typename T>
void pack_image(const core::Image& image, int slot, Matrix<T>& images) {
  const std::size_t hw = static_cast<std::size_t>(image.width) * image.height;
  if (images.rows() != 3 || static_cast<std::size_t>(images.cols()) < (slot + 1) * hw) {
    throw std::invalid_argument("pack_image: batch tensor too small");
  }
  for (int c = 0; c < 3; ++c) {
    T* dst = images.row(c).data() + slot * hw;
    for (std::size_t i = 0; i < hw; ++i) dst[i] = static_cast<T>(image.data[i * 3 + c]) - T(0.5);
  }
}

template <typename T>
struct PlannerNet<T>::Workspace {
  int n = 0;
  // encoder
  std::vector<Matrix<T>> cols, pre, act;
  std::vector<int> in_c, in_h, in_w, out_h, out_w;
  Matrix<T> features;  // C x (n*hw)
  // head
  std::vector<double> speed_norm;
  std::vector<int> branch;
  Matrix<T> flat, trunk_pre, latent, global_pre, global_map, dec_in, dec_pre, dec_act, scores, probs, points;
  struct Group {
    int stack = 0;
    std::vector<int> idx;
    Matrix<T> x, z1, h1, m1, z2, h2, m2, y;
  };
  std::vector<Group> groups;
  Matrix<T> bev;  // 2K x n
  Matrix<T> quality_all;
  std::vector<T> logits;
};

template <typename T>
PlannerNet<T>::PlannerNet(PlannerConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  keep_large_buffers_in_heap();
  std::mt19937_64 rng(seed);
  const auto he = [](int fan_in) { return std::sqrt(6.0 / fan_in); };
  const auto lecun = [](int fan_in) { return std::sqrt(3.0 / fan_in); };

  int c_in = 3;
  for (std::size_t i = 0; i < config_.encoder.size(); ++i) {
    const int c = config_.encoder[i].channels;
    enc_w_.push_back(static_cast<int>(params_.size()));
    add_parameter("encoder." + std::to_string(i) + ".weight", c, c_in * 9, he(c_in * 9), rng);
    enc_b_.push_back(static_cast<int>(params_.size()));
    add_parameter("encoder." + std::to_string(i) + ".bias", c, 1, 0.0, rng);
    c_in = c;
  }
  const int hw = config_.feature_width() * config_.feature_height();
  const int C = c_in;
  const int K = config_.num_waypoints;
  const int B = config_.num_branches;
  const int f = config_.decoder_upsample;

  trunk_w_ = static_cast<int>(params_.size());
  add_parameter("trunk.weight", config_.latent_dim, C * hw + 1, he(C * hw + 1), rng);
  trunk_b_ = static_cast<int>(params_.size());
  add_parameter("trunk.bias", config_.latent_dim, 1, 0.0, rng);
  global_w_ = static_cast<int>(params_.size());
  add_parameter("global.weight", config_.global_channels * hw, config_.latent_dim, he(config_.latent_dim), rng);
  global_b_ = static_cast<int>(params_.size());
  add_parameter("global.bias", config_.global_channels * hw, 1, 0.0, rng);
  const int dec_in = C + config_.global_channels + 1;
  dec_w_ = static_cast<int>(params_.size());
  add_parameter("decoder.weight", config_.decoder_channels * f * f, dec_in, he(dec_in), rng);
  dec_b_ = static_cast<int>(params_.size());
  add_parameter("decoder.bias", config_.decoder_channels * f * f, 1, 0.0, rng);
  heat_w_ = static_cast<int>(params_.size());
  add_parameter("heatmap.weight", B * K, config_.decoder_channels, lecun(config_.decoder_channels), rng);
  heat_b_ = static_cast<int>(params_.size());
  add_parameter("heatmap.bias", B * K, 1, 0.0, rng);

  if (config_.variant != Variant::kImagePlaneHomography) {
    const int stacks = config_.variant == Variant::kMultiBranchBev ? B : 1;
    const int P = config_.projection_hidden;
    for (int s = 0; s < stacks; ++s) {
      const std::string base =
          std::string("projection.") + (config_.variant == Variant::kMultiBranchBev ? kStackNames[s] : "shared");
      std::array<int, 6> idx{};
      idx[0] = static_cast<int>(params_.size());
      add_parameter(base + ".0.weight", P, 2 * K, he(2 * K), rng);
      idx[1] = static_cast<int>(params_.size());
      add_parameter(base + ".0.bias", P, 1, 0.0, rng);
      idx[2] = static_cast<int>(params_.size());
      add_parameter(base + ".1.weight", P, P, he(P), rng);
      idx[3] = static_cast<int>(params_.size());
      add_parameter(base + ".1.bias", P, 1, 0.0, rng);
      idx[4] = static_cast<int>(params_.size());
      add_parameter(base + ".2.weight", 2 * K, P, lecun(P), rng);
      idx[5] = static_cast<int>(params_.size());
      add_parameter(base + ".2.bias", 2 * K, 1, 0.0, rng);
      proj_.push_back(idx);
    }
  }
  qual_w_ = static_cast<int>(params_.size());
  add_parameter("quality.weight", B, config_.latent_dim, lecun(config_.latent_dim), rng);
  qual_b_ = static_cast<int>(params_.size());
  add_parameter("quality.bias", B, 1, 0.0, rng);
}

template <typename T>
void PlannerNet<T>::add_parameter(std::string name, int rows, int cols, double init_bound, std::mt19937_64& rng) {
  Parameter<T> p;
  p.name = std::move(name);
  p.value.resize(rows, cols);
  std::uniform_real_distribution<double> uni(-init_bound, init_bound);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) {
    p.value.data()[i] = init_bound > 0.0 ? static_cast<T>(uni(rng)) : T(0);
  }
  p.grad = Matrix<T>::Zero(rows, cols);
  params_.push_back(std::move(p));
}

template <typename T>
int PlannerNet<T>::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<int>(i);
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

template <typename T>
Parameter<T>& PlannerNet<T>::parameter(std::string_view name) {
  return params_[index_of(name)];
}

template <typename T>
const Parameter<T>& PlannerNet<T>::parameter(std::string_view name) const {
  return params_[index_of(name)];
}

template <typename T>
std::size_t PlannerNet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <typename T>
std::uint64_t PlannerNet<T>::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params_) {
    h = core::fnv1a64(p.name, h);
    h = core::fnv1a64(std::string_view(reinterpret_cast<const char*>(p.value.data()), p.value.size() * sizeof(T)), h);
  }
  return h;
}

template <typename T>
void PlannerNet<T>::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

template <typename T>
void PlannerNet<T>::run_encoder(const Matrix<T>& images, int n, Workspace& ws) const {
  const std::size_t L = config_.encoder.size();
  if (images.rows() != 3 || images.cols() != static_cast<Eigen::Index>(n) * config_.input_width * config_.input_height) {
    throw std::invalid_argument("image batch must be 3 x (n * height * width)");
  }
  ws.n = n;
  ws.cols.resize(L);
  ws.pre.resize(L);
  ws.act.resize(L);
  ws.in_c.resize(L);
  ws.in_h.resize(L);
  ws.in_w.resize(L);
  ws.out_h.resize(L);
  ws.out_w.resize(L);
  const Matrix<T>* a = &images;
  int c = 3, h = config_.input_height, w = config_.input_width;
  for (std::size_t i = 0; i < L; ++i) {
    const int s = config_.encoder[i].stride;
    const int ho = (h - 1) / s + 1, wo = (w - 1) / s + 1;
    ws.in_c[i] = c;
    ws.in_h[i] = h;
    ws.in_w[i] = w;
    ws.out_h[i] = ho;
    ws.out_w[i] = wo;
    im2col(*a, n, c, h, w, s, ho, wo, ws.cols[i]);
    affine(params_[enc_w_[i]].value, params_[enc_b_[i]].value, ws.cols[i], ws.pre[i]);
    ws.act[i] = ws.pre[i].cwiseMax(T(0));
    a = &ws.act[i];
    c = config_.encoder[i].channels;
    h = ho;
    w = wo;
  }
  ws.features = ws.act.back();
}

template <typename T>
void PlannerNet<T>::run_head(const std::vector<double>& speeds, const std::vector<core::Command>& commands,
                             Workspace& ws, std::mt19937_64* rng) const {
  const int n = ws.n;
  const int C = config_.feature_channels();
  const int fw = config_.feature_width(), fh = config_.feature_height(), hw = fw * fh;
  const int K = config_.num_waypoints;
  const int Cg = config_.global_channels;
  const int Cd = config_.decoder_channels;
  const int f = config_.decoder_upsample;
  const int Wh = config_.heatmap_width(), Hh = config_.heatmap_height(), hw2 = Wh * Hh;
  const Matrix<T>& F = ws.features;

  ws.speed_norm.resize(n);
  ws.branch.resize(n);
  for (int s = 0; s < n; ++s) {
    ws.speed_norm[s] = speeds[s] / config_.speed_max;
    ws.branch[s] = core::command_index(commands[s]);
  }

  ws.flat.resize(C * hw + 1, n);
  for (int c = 0; c < C; ++c) {
    for (int s = 0; s < n; ++s) {
      for (int p = 0; p < hw; ++p) ws.flat(c * hw + p, s) = F(c, s * hw + p);
    }
  }
  for (int s = 0; s < n; ++s) ws.flat(C * hw, s) = static_cast<T>(ws.speed_norm[s]);

  affine(params_[trunk_w_].value, params_[trunk_b_].value, ws.flat, ws.trunk_pre);
  ws.latent = ws.trunk_pre.cwiseMax(T(0));
  affine(params_[global_w_].value, params_[global_b_].value, ws.latent, ws.global_pre);

  ws.global_map.resize(Cg, static_cast<Eigen::Index>(n) * hw);
  for (int g = 0; g < Cg; ++g) {
    for (int s = 0; s < n; ++s) {
      for (int p = 0; p < hw; ++p) ws.global_map(g, s * hw + p) = std::max(T(0), ws.global_pre(g * hw + p, s));
    }
  }

  ws.dec_in.resize(C + Cg + 1, static_cast<Eigen::Index>(n) * hw);
  ws.dec_in.topRows(C) = F;
  ws.dec_in.middleRows(C, Cg) = ws.global_map;
  for (int s = 0; s < n; ++s) {
    for (int p = 0; p < hw; ++p) ws.dec_in(C + Cg, s * hw + p) = static_cast<T>(ws.speed_norm[s]);
  }

  affine(params_[dec_w_].value, params_[dec_b_].value, ws.dec_in, ws.dec_pre);
  ws.dec_act.resize(Cd, static_cast<Eigen::Index>(n) * hw2);
  for (int c = 0; c < Cd; ++c) {
    for (int dy = 0; dy < f; ++dy) {
      for (int dx = 0; dx < f; ++dx) {
        const T* src = ws.dec_pre.row((c * f + dy) * f + dx).data();
        T* dst = ws.dec_act.row(c).data();
        for (int s = 0; s < n; ++s) {
          for (int y = 0; y < fh; ++y) {
            for (int x = 0; x < fw; ++x) {
              dst[s * hw2 + (y * f + dy) * Wh + x * f + dx] = std::max(T(0), src[s * hw + y * fw + x]);
            }
          }
        }
      }
    }
  }

  affine(params_[heat_w_].value, params_[heat_b_].value, ws.dec_act, ws.scores);

  ws.probs.resize(static_cast<Eigen::Index>(n) * K, hw2);
  ws.points.resize(2 * K, n);
  const T temp = static_cast<T>(config_.softmax_temperature);
  for (int s = 0; s < n; ++s) {
    for (int k = 0; k < K; ++k) {
      const int ch = ws.branch[s] * K + k;
      T u, v;
      softmax_expectation<T>(ws.scores.row(ch).data() + static_cast<std::size_t>(s) * hw2, Wh, Hh, temp,
                             ws.probs.row(s * K + k).data(), u, v);
      ws.points(2 * k, s) = u;
      ws.points(2 * k + 1, s) = v;
    }
  }

  ws.bev.resize(2 * K, n);
  ws.groups.clear();
  if (config_.variant == Variant::kImagePlaneHomography) {
    std::vector<core::Vec2> pts(K);
    for (int s = 0; s < n; ++s) {
      for (int k = 0; k < K; ++k) pts[k] = {double(ws.points(2 * k, s)), double(ws.points(2 * k + 1, s))};
      const auto bev = homography_to_bev(pts);
      for (int k = 0; k < K; ++k) {
        ws.bev(2 * k, s) = static_cast<T>(bev[k].x);
        ws.bev(2 * k + 1, s) = static_cast<T>(bev[k].y);
      }
    }
  } else {
    const bool multi = config_.variant == Variant::kMultiBranchBev;
    const int stacks = multi ? config_.num_branches : 1;
    ws.groups.resize(stacks);
    for (int g = 0; g < stacks; ++g) ws.groups[g].stack = g;
    for (int s = 0; s < n; ++s) ws.groups[multi ? ws.branch[s] : 0].idx.push_back(s);
    const T scale = static_cast<T>(config_.bev_output_scale);
    for (auto& g : ws.groups) {
      if (g.idx.empty()) continue;
      const auto& ids = proj_[g.stack];
      const int m = static_cast<int>(g.idx.size());
      g.x.resize(2 * K, m);
      for (int j = 0; j < m; ++j) g.x.col(j) = ws.points.col(g.idx[j]);
      affine(params_[ids[0]].value, params_[ids[1]].value, g.x, g.z1);
      g.h1 = g.z1.cwiseMax(T(0));
      if (rng && config_.dropout > 0.0) {
        draw_dropout_mask(g.h1.rows(), g.h1.cols(), config_.dropout, *rng, g.m1);
        g.h1 = g.h1.cwiseProduct(g.m1);
      } else {
        g.m1.resize(0, 0);
      }
      affine(params_[ids[2]].value, params_[ids[3]].value, g.h1, g.z2);
      g.h2 = g.z2.cwiseMax(T(0));
      if (rng && config_.dropout > 0.0) {
        draw_dropout_mask(g.h2.rows(), g.h2.cols(), config_.dropout, *rng, g.m2);
        g.h2 = g.h2.cwiseProduct(g.m2);
      } else {
        g.m2.resize(0, 0);
      }
      affine(params_[ids[4]].value, params_[ids[5]].value, g.h2, g.y);
      for (int j = 0; j < m; ++j) ws.bev.col(g.idx[j]) = scale * g.y.col(j);
    }
  }

  affine(params_[qual_w_].value, params_[qual_b_].value, ws.latent, ws.quality_all);
  ws.logits.resize(n);
  for (int s = 0; s < n; ++s) ws.logits[s] = ws.quality_all(ws.branch[s], s);

  if (!ws.bev.allFinite() || !ws.quality_all.allFinite()) {
    throw NonFiniteError("planner forward produced non-finite values");
  }
}

template <typename T>
std::vector<core::WaypointPlan> PlannerNet<T>::collect_plans(const Workspace& ws) const {
  const int K = config_.num_waypoints;
  std::vector<core::WaypointPlan> out(ws.n);
  for (int s = 0; s < ws.n; ++s) {
    out[s].waypoints.resize(K);
    for (int k = 0; k < K; ++k) out[s].waypoints[k] = {double(ws.bev(2 * k, s)), double(ws.bev(2 * k + 1, s))};
    const double z = static_cast<double>(ws.logits[s]);
    out[s].quality = 1.0 / (1.0 + std::exp(-z));
  }
  return out;
}

template <typename T>
typename PlannerNet<T>::Features PlannerNet<T>::encode(const core::Image& image) const {
  if (image.width != config_.input_width || image.height != config_.input_height) {
    throw std::invalid_argument("planner input resolution mismatch: got " + std::to_string(image.width) + "x" +
                                std::to_string(image.height) + ", expected " + std::to_string(config_.input_width) +
                                "x" + std::to_string(config_.input_height));
  }
  Matrix<T> images(3, static_cast<Eigen::Index>(image.width) * image.height);
  pack_image<T>(image, 0, images);
  Workspace ws;
  run_encoder(images, 1, ws);
  return Features{std::move(ws.features)};
}

template <typename T>
core::WaypointPlan PlannerNet<T>::decode(const Features& features, double speed, core::Command command) const {
  Workspace ws;
  ws.n = 1;
  ws.features = features.map;
  run_head({speed}, {command}, ws, nullptr);
  return collect_plans(ws).front();
}

template <typename T>
core::WaypointPlan PlannerNet<T>::forward(const core::Observation& obs) const {
  return decode(encode(obs.image), obs.speed, obs.command);
}

template <typename T>
std::vector<core::Vec2> PlannerNet<T>::image_points(const Features& features, double speed,
                                                    core::Command command) const {
  Workspace ws;
  ws.n = 1;
  ws.features = features.map;
  run_head({speed}, {command}, ws, nullptr);
  std::vector<core::Vec2> pts(config_.num_waypoints);
  for (int k = 0; k < config_.num_waypoints; ++k) pts[k] = {double(ws.points(2 * k, 0)), double(ws.points(2 * k + 1, 0))};
  return pts;
}

template <typename T>
std::vector<core::WaypointPlan> PlannerNet<T>::forward_batch(const Batch<T>& batch, std::mt19937_64* rng) const {
  Workspace ws;
  run_encoder(batch.images, batch.size(), ws);
  run_head(batch.speeds, batch.commands, ws, rng);
  return collect_plans(ws);
}

template <typename T>
std::vector<core::Vec2> PlannerNet<T>::image_plane_target(const core::WaypointPlan& target) const {
  const auto& cam = config_.homography_camera;
  const double umin = 0.5 / config_.heatmap_width(), vmin = 0.5 / config_.heatmap_height();
  std::vector<core::Vec2> out(target.size());
  for (std::size_t k = 0; k < target.size(); ++k) {
    const auto px = cam.project_ground(target.waypoints[k]);
    core::Vec2 uv = px ? core::Vec2{px->x / cam.width, px->y / cam.height} : core::Vec2{0.5, 1.0};
    uv.x = std::clamp(uv.x, umin, 1.0 - umin);
    uv.y = std::clamp(uv.y, vmin, 1.0 - vmin);
    out[k] = uv;
  }
  return out;
}

template <typename T>
std::vector<core::Vec2> PlannerNet<T>::homography_to_bev(std::span<const core::Vec2> image_points) const {
  const auto& cam = config_.homography_camera;
  const double min_row = cam.horizon_row() + 0.5;
  std::vector<core::Vec2> out(image_points.size());
  for (std::size_t k = 0; k < image_points.size(); ++k) {
    const core::Vec2 px{image_points[k].x * cam.width, std::max(image_points[k].y * cam.height, min_row)};
    out[k] = cam.ground_from_pixel(px).value_or(core::Vec2{0.0, 0.0});
  }
  return out;
}

template <typename T>
BatchStats PlannerNet<T>::forward_backward(const Batch<T>& batch, const LossOptions& options, std::mt19937_64* rng) {
  const int n = batch.size();
  const int K = config_.num_waypoints;
  if (n == 0) throw std::invalid_argument("forward_backward: empty batch");
  if (static_cast<int>(batch.targets.size()) != n) throw std::invalid_argument("forward_backward: missing targets");
  if (!batch.quality_targets.empty() && static_cast<int>(batch.quality_targets.size()) != n) {
    throw std::invalid_argument("forward_backward: quality target count mismatch");
  }
  Workspace ws;
  run_encoder(batch.images, n, ws);
  run_head(batch.speeds, batch.commands, ws, rng);

  const bool image_plane = config_.variant == Variant::kImagePlaneHomography;
  Matrix<T> d_out = Matrix<T>::Zero(2 * K, n);
  std::vector<T> d_logit(n, T(0));
  BatchStats stats;
  stats.count = n;
  const double inv = 1.0 / (2.0 * K * n);
  for (int s = 0; s < n; ++s) {
    const auto& tgt = batch.targets[s];
    if (static_cast<int>(tgt.size()) != K) throw std::invalid_argument("forward_backward: target waypoint count");
    double plan = 0.0, ade = 0.0;
    const std::vector<core::Vec2> img_tgt = image_plane ? image_plane_target(tgt) : std::vector<core::Vec2>{};
    for (int k = 0; k < K; ++k) {
      const double px = ws.bev(2 * k, s), py = ws.bev(2 * k + 1, s);
      ade += std::hypot(px - tgt.waypoints[k].x, py - tgt.waypoints[k].y);
      double ex, ey;
      if (image_plane) {
        ex = double(ws.points(2 * k, s)) - img_tgt[k].x;
        ey = double(ws.points(2 * k + 1, s)) - img_tgt[k].y;
      } else {
        ex = px - tgt.waypoints[k].x;
        ey = py - tgt.waypoints[k].y;
      }
      plan += std::abs(ex) + std::abs(ey);
      d_out(2 * k, s) = static_cast<T>((ex > 0) - (ex < 0)) * static_cast<T>(inv);
      d_out(2 * k + 1, s) = static_cast<T>((ey > 0) - (ey < 0)) * static_cast<T>(inv);
    }
    plan /= 2.0 * K;
    ade /= K;
    const int qt =
        batch.quality_targets.empty() ? quality_target_for(ade, options.quality_threshold) : batch.quality_targets[s];
    const double z = static_cast<double>(ws.logits[s]);
    const double sigma = 1.0 / (1.0 + std::exp(-z));
    const double lq = bce_with_logit(z, qt);
    d_logit[s] = static_cast<T>(options.lambda * (sigma - qt) / n);
    stats.plan_loss += plan / n;
    stats.quality_loss += lq / n;
    stats.ade += ade / n;
  }
  stats.loss = stats.plan_loss + options.lambda * stats.quality_loss;
  if (!std::isfinite(stats.loss)) throw NonFiniteError("non-finite training loss");

  zero_grad();
  backward(ws, d_out, d_logit);
  return stats;
}

template <typename T>
void PlannerNet<T>::backward(Workspace& ws, const Matrix<T>& d_out, const std::vector<T>& d_logit) {
  const int n = ws.n;
  const int C = config_.feature_channels();
  const int fw = config_.feature_width(), fh = config_.feature_height(), hw = fw * fh;
  const int K = config_.num_waypoints;
  const int Cg = config_.global_channels;
  const int Cd = config_.decoder_channels;
  const int f = config_.decoder_upsample;
  const int Wh = config_.heatmap_width(), Hh = config_.heatmap_height(), hw2 = Wh * Hh;

  // Projection stacks.
  Matrix<T> d_points;
  if (config_.variant == Variant::kImagePlaneHomography) {
    d_points = d_out;
  } else {
    d_points = Matrix<T>::Zero(2 * K, n);
    const T scale = static_cast<T>(config_.bev_output_scale);
    for (auto& g : ws.groups) {
      if (g.idx.empty()) continue;
      const auto& ids = proj_[g.stack];
      const int m = static_cast<int>(g.idx.size());
      Matrix<T> dy(2 * K, m);
      for (int j = 0; j < m; ++j) dy.col(j) = scale * d_out.col(g.idx[j]);
      params_[ids[4]].grad.noalias() += dy * g.h2.transpose();
      params_[ids[5]].grad += dy.rowwise().sum();
      Matrix<T> dh2 = params_[ids[4]].value.transpose() * dy;
      if (g.m2.size() > 0) dh2 = dh2.cwiseProduct(g.m2);
      const Matrix<T> dz2 = relu_grad(dh2, g.z2);
      params_[ids[2]].grad.noalias() += dz2 * g.h1.transpose();
      params_[ids[3]].grad += dz2.rowwise().sum();
      Matrix<T> dh1 = params_[ids[2]].value.transpose() * dz2;
      if (g.m1.size() > 0) dh1 = dh1.cwiseProduct(g.m1);
      const Matrix<T> dz1 = relu_grad(dh1, g.z1);
      params_[ids[0]].grad.noalias() += dz1 * g.x.transpose();
      params_[ids[1]].grad += dz1.rowwise().sum();
      const Matrix<T> dx = params_[ids[0]].value.transpose() * dz1;
      for (int j = 0; j < m; ++j) d_points.col(g.idx[j]) = dx.col(j);
    }
  }

  // Spatial softmax: only the selected branch channels receive gradient.
  Matrix<T> d_scores = Matrix<T>::Zero(ws.scores.rows(), ws.scores.cols());
  const T inv_temp = T(1) / static_cast<T>(config_.softmax_temperature);
  for (int s = 0; s < n; ++s) {
    for (int k = 0; k < K; ++k) {
      const T gu = d_points(2 * k, s), gv = d_points(2 * k + 1, s);
      if (gu == T(0) && gv == T(0)) continue;
      const T u = ws.points(2 * k, s), v = ws.points(2 * k + 1, s);
      const T* p = ws.probs.row(s * K + k).data();
      T* ds = d_scores.row(ws.branch[s] * K + k).data() + static_cast<std::size_t>(s) * hw2;
      for (int i = 0; i < Hh; ++i) {
        const T cv = (T(i) + T(0.5)) / T(Hh) - v;
        for (int j = 0; j < Wh; ++j) {
          const T cu = (T(j) + T(0.5)) / T(Wh) - u;
          ds[i * Wh + j] = p[i * Wh + j] * (gu * cu + gv * cv) * inv_temp;
        }
      }
    }
  }

  params_[heat_w_].grad.noalias() += d_scores * ws.dec_act.transpose();
  params_[heat_b_].grad += d_scores.rowwise().sum();
  const Matrix<T> d_dec_act = params_[heat_w_].value.transpose() * d_scores;

  Matrix<T> d_dec_pre(Cd * f * f, static_cast<Eigen::Index>(n) * hw);
  for (int c = 0; c < Cd; ++c) {
    for (int dy = 0; dy < f; ++dy) {
      for (int dx = 0; dx < f; ++dx) {
        const int row = (c * f + dy) * f + dx;
        const T* pre = ws.dec_pre.row(row).data();
        const T* src = d_dec_act.row(c).data();
        T* dst = d_dec_pre.row(row).data();
        for (int s = 0; s < n; ++s) {
          for (int y = 0; y < fh; ++y) {
            for (int x = 0; x < fw; ++x) {
              const int q = s * hw + y * fw + x;
              dst[q] = pre[q] > T(0) ? src[s * hw2 + (y * f + dy) * Wh + x * f + dx] : T(0);
            }
          }
        }
      }
    }
  }
  params_[dec_w_].grad.noalias() += d_dec_pre * ws.dec_in.transpose();
  params_[dec_b_].grad += d_dec_pre.rowwise().sum();
  const Matrix<T> d_dec_in = params_[dec_w_].value.transpose() * d_dec_pre;

  Matrix<T> dF = d_dec_in.topRows(C);
  Matrix<T> d_global_pre(Cg * hw, n);
  for (int g = 0; g < Cg; ++g) {
    for (int s = 0; s < n; ++s) {
      for (int p = 0; p < hw; ++p) {
        d_global_pre(g * hw + p, s) = ws.global_pre(g * hw + p, s) > T(0) ? d_dec_in(C + g, s * hw + p) : T(0);
      }
    }
  }
  params_[global_w_].grad.noalias() += d_global_pre * ws.latent.transpose();
  params_[global_b_].grad += d_global_pre.rowwise().sum();
  Matrix<T> d_latent = params_[global_w_].value.transpose() * d_global_pre;

  Matrix<T> d_quality = Matrix<T>::Zero(config_.num_branches, n);
  for (int s = 0; s < n; ++s) d_quality(ws.branch[s], s) = d_logit[s];
  params_[qual_w_].grad.noalias() += d_quality * ws.latent.transpose();
  params_[qual_b_].grad += d_quality.rowwise().sum();
  d_latent.noalias() += params_[qual_w_].value.transpose() * d_quality;

  const Matrix<T> d_trunk_pre = relu_grad(d_latent, ws.trunk_pre);
  params_[trunk_w_].grad.noalias() += d_trunk_pre * ws.flat.transpose();
  params_[trunk_b_].grad += d_trunk_pre.rowwise().sum();
  const Matrix<T> d_flat = params_[trunk_w_].value.transpose() * d_trunk_pre;
  for (int c = 0; c < C; ++c) {
    for (int s = 0; s < n; ++s) {
      for (int p = 0; p < hw; ++p) dF(c, s * hw + p) += d_flat(c * hw + p, s);
    }
  }

  // Encoder.
  Matrix<T> d_act = std::move(dF);
  for (int i = static_cast<int>(config_.encoder.size()) - 1; i >= 0; --i) {
    const Matrix<T> dz = relu_grad(d_act, ws.pre[i]);
    params_[enc_w_[i]].grad.noalias() += dz * ws.cols[i].transpose();
    params_[enc_b_[i]].grad += dz.rowwise().sum();
    if (i == 0) break;
    const Matrix<T> dcol = params_[enc_w_[i]].value.transpose() * dz;
    col2im(dcol, n, ws.in_c[i], ws.in_h[i], ws.in_w[i], config_.encoder[i].stride, ws.out_h[i], ws.out_w[i], d_act);
  }
}

template <typename T>
ProjectionStack PlannerNet<T>::projection_stack(core::Command command) const {
  if (proj_.empty()) throw std::logic_error("homography variant has no learned projection");
  const auto& ids = proj_[config_.variant == Variant::kMultiBranchBev ? core::command_index(command) : 0];
  ProjectionStack s;
  s.w1 = params_[ids[0]].value.template cast<double>();
  s.b1 = params_[ids[1]].value.template cast<double>().col(0);
  s.w2 = params_[ids[2]].value.template cast<double>();
  s.b2 = params_[ids[3]].value.template cast<double>().col(0);
  s.w3 = params_[ids[4]].value.template cast<double>();
  s.b3 = params_[ids[5]].value.template cast<double>().col(0);
  s.output_scale = config_.bev_output_scale;
  return s;
}

template <typename T>
std::vector<typename PlannerNet<T>::BranchSlice> PlannerNet<T>::branch_parameters(int branch) const {
  if (branch < 0 || branch >= config_.num_branches) throw std::out_of_range("branch index");
  const int K = config_.num_waypoints;
  std::vector<BranchSlice> out = {{"heatmap.weight", branch * K, (branch + 1) * K},
                                  {"heatmap.bias", branch * K, (branch + 1) * K},
                                  {"quality.weight", branch, branch + 1},
                                  {"quality.bias", branch, branch + 1}};
  if (config_.variant == Variant::kMultiBranchBev) {
    for (int i : proj_[branch]) out.push_back({params_[i].name, 0, static_cast<int>(params_[i].value.rows())});
  }
  return out;
}

template class PlannerNet<float>;
template class PlannerNet<double>;
template void pack_image<float>(const core::Image&, int, Matrix<float>&);
template void pack_image<double>(const core::Image&, int, Matrix<double>&);

}  // namespace selfd::planner
