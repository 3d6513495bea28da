// mtl/nn/dropout.hpp

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

#include "mtl/core/base.hpp"
#include "mtl/core/random.hpp"

namespace mtl {

template <typename Real>
struct DropoutResult {
  Matrix<Real> output;
  Matrix<Real> mask;  // 0 for dropped units, 1/(1-rate) for kept ones
};

/// Inverted dropout.
template <typename Real>
DropoutResult<Real> dropout_apply(const Matrix<Real>& input, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ConfigError(str_cat("dropout rate must be in [0, 1), got ", rate));
  DropoutResult<Real> r;
  if (rate == 0.0) {
    r.output = input;
    r.mask = Matrix<Real>::Ones(input.rows(), input.cols());
    return r;
  }
  const Real keep_scale = static_cast<Real>(1.0 / (1.0 - rate));
  r.mask.resize(input.rows(), input.cols());
  for (Eigen::Index i = 0; i < r.mask.size(); ++i)
    r.mask.data()[i] = rng.uniform() < rate ? Real(0) : keep_scale;
  r.output = input.cwiseProduct(r.mask);
  return r;
}

template <typename Real>
Matrix<Real> dropout_backward(const Matrix<Real>& grad_output, const Matrix<Real>& mask) {
  return grad_output.cwiseProduct(mask);
}

}  // namespace mtl
