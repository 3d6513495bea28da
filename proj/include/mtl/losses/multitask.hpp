// mtl/losses/multitask.hpp

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

#include "mtl/losses/cross_entropy.hpp"

namespace mtl {

template <typename Real>
struct CombinedLoss {
  Real loss = 0;
  Real ctc_scale = 0;  // multiplies the CTC head's gradient
  Real ce_scale = 0;   // multiplies the CE head's gradient
};

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ConfigError(str_cat("lambda must be in [0, 1], got ", lambda));
}

/// (1 - lambda) * ctc + lambda * ce, both computed over the whole utterance.
template <typename Real>
CombinedLoss<Real> combine_losses(Real ctc_loss, Real ce_loss, double lambda) {
  check_lambda(lambda);
  CombinedLoss<Real> c;
  const Real lam = static_cast<Real>(lambda);
  c.ctc_scale = Real(1) - lam;
  c.ce_scale = lam;
  c.loss = c.ctc_scale * ctc_loss + c.ce_scale * ce_loss;
  return c;
}

template <typename Real>
CombinedLoss<Real> combine_losses(const LossResult<Real>& ctc, const LossResult<Real>& ce,
                                  double lambda) {
  return combine_losses<Real>(ctc.loss, ce.loss, lambda);
}

}  // namespace mtl
