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

#include <cmath>
#include <vector>

#include "selfd/planner/network.hpp"

namespace selfd::planner {

template <typename T>
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam(const std::vector<Parameter<T>>& params, Options options) : options_(options) {
    for (const auto& p : params) {
      m_.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
    }
  }

  void step(std::vector<Parameter<T>>& params) {
    ++t_;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    const T lr = static_cast<T>(options_.learning_rate * std::sqrt(c2) / c1);
    const T b1 = static_cast<T>(options_.beta1), b2 = static_cast<T>(options_.beta2);
    const T eps = static_cast<T>(options_.epsilon * std::sqrt(c2));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& g = params[i].grad;
      m_[i] = b1 * m_[i] + (T(1) - b1) * g;
      v_[i] = b2 * v_[i] + (T(1) - b2) * g.cwiseAbs2();
      params[i].value.array() -= lr * m_[i].array() / (v_[i].array().sqrt() + eps);
    }
  }

  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  long steps() const { return t_; }

 private:
  Options options_;
  std::vector<Matrix<T>> m_, v_;
  long t_ = 0;
};

}  // namespace selfd::planner
