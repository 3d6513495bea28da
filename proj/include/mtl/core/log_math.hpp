// mtl/core/log_math.hpp

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

#include <algorithm>
#include <cmath>
#include <limits>

namespace mtl {

template <typename Real>
constexpr Real log_zero() {
  return -std::numeric_limits<Real>::infinity();
}

/// log(exp(a) + exp(b)); log_zero() is absorbing.
template <typename Real>
inline Real log_add(Real a, Real b) {
  if (a < b) std::swap(a, b);
  if (b == log_zero<Real>()) return a;
  return a + std::log1p(std::exp(b - a));
}

template <typename Real>
inline Real log_add(Real a, Real b, Real c) {
  return log_add(log_add(a, b), c);
}

/// Max-shifted log-sum-exp over any range of reals.
template <typename Range>
auto log_sum_exp(const Range& xs) {
  using Real = std::decay_t<decltype(*std::begin(xs))>;
  Real m = log_zero<Real>();
  for (Real x : xs) m = std::max(m, x);
  if (m == log_zero<Real>()) return m;
  Real s = 0;
  for (Real x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace mtl
