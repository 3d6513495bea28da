// mtl/losses/cross_entropy.hpp

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

#include "mtl/losses/ctc.hpp"

namespace mtl {

enum class CeNormalization { kSum, kPerFrame };

/// Framewise cross-entropy against one state label per frame:
/// loss = -sum_t log y_t(l_t), grad_t = softmax_t - onehot(l_t).
/// kPerFrame divides loss and gradient by T.
template <typename Real>
LossResult<Real> framewise_ce_loss(const Matrix<Real>& logprobs, const FrameLabels& labels,
                                   CeNormalization norm = CeNormalization::kSum) {
  const Eigen::Index T = logprobs.rows();
  const Eigen::Index S = logprobs.cols();
  if (static_cast<Eigen::Index>(labels.size()) != T)
    throw InvalidTargetError(str_cat("ce: ", labels.size(), " frame labels for ", T, " frames"));
  LossResult<Real> r;
  r.grad_logits = logprobs.array().exp().matrix();
  Real loss = 0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const int l = labels[static_cast<std::size_t>(t)];
    if (l < 0 || l >= S)
      throw InvalidTargetError(str_cat("ce: state label ", l, " outside [0, ", S - 1, "]"));
    loss -= logprobs(t, l);
    r.grad_logits(t, l) -= Real(1);
  }
  if (norm == CeNormalization::kPerFrame && T > 0) {
    loss /= static_cast<Real>(T);
    r.grad_logits /= static_cast<Real>(T);
  }
  r.loss = loss;
  return r;
}

/// Fraction of frames whose argmax state differs from the label.
template <typename Real>
double framewise_errors(const Matrix<Real>& logprobs, const FrameLabels& labels) {
  std::size_t wrong = 0;
  for (Eigen::Index t = 0; t < logprobs.rows(); ++t) {
    Eigen::Index arg;
    logprobs.row(t).maxCoeff(&arg);
    if (arg != labels[static_cast<std::size_t>(t)]) ++wrong;
  }
  return static_cast<double>(wrong);
}

}  // namespace mtl
