// mtl/nn/linear.hpp

// Copyright 2026  The mtl-ctc Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <string>

#include "mtl/core/base.hpp"
#include "mtl/core/random.hpp"

namespace mtl {

/// Fills with U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename Real>
void init_uniform_fan_in(Matrix<Real>& m, int fan_in, Rng& rng) {
  const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<Real>(rng.uniform(-r, r));
}

/// y = x W + b, applied per row.
template <typename Real>
Matrix<Real> linear_forward(const Matrix<Real>& input, const Matrix<Real>& weight,
                            const Matrix<Real>& bias) {
  if (input.cols() != weight.rows())
    throw ConfigError(str_cat("linear: input dim ", input.cols(),
                              " does not match weight rows ", weight.rows()));
  if (bias.rows() != 1 || bias.cols() != weight.cols())
    throw ConfigError("linear: bias shape mismatch");
  Matrix<Real> out = input * weight;
  out.rowwise() += bias.row(0);
  return out;
}

/// Accumulates dW and db; returns dX.
template <typename Real>
Matrix<Real> linear_backward(const Matrix<Real>& input, const Matrix<Real>& grad_output,
                             const Matrix<Real>& weight, Matrix<Real>& grad_weight,
                             Matrix<Real>& grad_bias) {
  if (grad_output.rows() != input.rows() || grad_output.cols() != weight.cols())
    throw ConfigError("linear backward: gradient shape mismatch");
  grad_weight.noalias() += input.transpose() * grad_output;
  grad_bias += grad_output.colwise().sum();
  return grad_output * weight.transpose();
}

template <typename Real>
struct Linear {
  Parameter<Real> weight;
  Parameter<Real> bias;

  Linear() = default;
  Linear(const std::string& name, int in_dim, int out_dim)
      : weight(name + ".weight", in_dim, out_dim), bias(name + ".bias", 1, out_dim) {}

  int in_dim() const { return static_cast<int>(weight.value.rows()); }
  int out_dim() const { return static_cast<int>(weight.value.cols()); }

  void init(Rng& rng) {
    init_uniform_fan_in(weight.value, in_dim(), rng);
    init_uniform_fan_in(bias.value, in_dim(), rng);
  }

  Matrix<Real> forward(const Matrix<Real>& x) const {
    return linear_forward(x, weight.value, bias.value);
  }

  Matrix<Real> backward(const Matrix<Real>& x, const Matrix<Real>& dy) {
    return linear_backward(x, dy, weight.value, weight.grad, bias.grad);
  }

  void collect(ParamRefs<Real>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

}  // namespace mtl
