// mtl/nn/activations.hpp

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

#include "mtl/core/base.hpp"

namespace mtl {

template <typename Real>
inline Real sigmoid(Real x) {
  // Split by sign so exp never overflows.
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

/// Row-wise log-softmax with max subtraction.
template <typename Real>
Matrix<Real> log_softmax(const Matrix<Real>& logits) {
  if (!logits.allFinite()) throw NumericError("log_softmax: non-finite logits");
  Matrix<Real> out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const Real m = logits.row(t).maxCoeff();
    const Real lse = m + std::log((logits.row(t).array() - m).exp().sum());
    out.row(t) = logits.row(t).array() - lse;
  }
  return out;
}

template <typename Real>
RowVector<Real> log_softmax_row(const RowVector<Real>& logits) {
  if (!logits.allFinite()) throw NumericError("log_softmax: non-finite logits");
  const Real m = logits.maxCoeff();
  const Real lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

/// Gradient of a loss w.r.t. logits given the gradient w.r.t. log_softmax
/// output: dz = g - softmax * sum(g).
template <typename Real>
Matrix<Real> log_softmax_backward(const Matrix<Real>& logprobs,
                                  const Matrix<Real>& grad_logprobs) {
  Matrix<Real> out(logprobs.rows(), logprobs.cols());
  for (Eigen::Index t = 0; t < logprobs.rows(); ++t) {
    const Real s = grad_logprobs.row(t).sum();
    out.row(t) = grad_logprobs.row(t).array() - logprobs.row(t).array().exp() * s;
  }
  return out;
}

}  // namespace mtl
