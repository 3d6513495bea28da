// mtl/losses/ctc.hpp

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

// Connectionist temporal classification loss.
//
// The label sequence z of length L is extended to z' = (blank, z_1, blank,
// z_2, ..., z_L, blank) of length S = 2L+1. With y_t(k) the network's
// posterior of symbol k at frame t:
//
//   alpha_t(s) = y_t(z'_s) * [alpha_{t-1}(s) + alpha_{t-1}(s-1)
//                             + alpha_{t-1}(s-2) if z'_s != blank, z'_s != z'_{s-2}]
//   beta_t(s)  = y_t(z'_s) * [beta_{t+1}(s) + beta_{t+1}(s+1)
//                             + beta_{t+1}(s+2) if z'_s != blank, z'_s != z'_{s+2}]
//
//   p(z|x) = alpha_{T-1}(S-1) + alpha_{T-1}(S-2)
//   loss   = -log p(z|x)
//
// and for every t, sum_s alpha_t(s) beta_t(s) / y_t(z'_s) = p(z|x).
// The gradient w.r.t. the pre-softmax activation u_t(k) is
//
//   dloss/du_t(k) = y_t(k) - (1/p) sum_{s: z'_s = k} alpha_t(s) beta_t(s) / y_t(k).
//
// Everything is computed in log space.

#pragma once

#include <cmath>
#include <vector>

#include "mtl/core/base.hpp"
#include "mtl/core/log_math.hpp"

namespace mtl {

/// Vocabulary indices without blanks. Blank is index 0.
using LabelSequence = std::vector<int>;
/// One state index per input frame.
using FrameLabels = std::vector<int>;

constexpr int kBlank = 0;

template <typename Real>
struct LossResult {
  Real loss = 0;
  Matrix<Real> grad_logits;  // T x V, w.r.t. pre-softmax activations
};

template <typename Real>
struct CtcTrellis {
  std::vector<int> extended;
  Matrix<Real> alpha;  // T x S, log space
  Matrix<Real> beta;   // T x S, log space, includes the emission at t
  Real log_likelihood = 0;
};

inline void validate_labels(const LabelSequence& z, int vocab_size) {
  if (z.empty()) throw InvalidTargetError("label sequence is empty");
  for (int k : z)
    if (k < 1 || k >= vocab_size)
      throw InvalidTargetError(str_cat("label ", k, " outside [1, ", vocab_size - 1, "]"));
}

inline std::vector<int> extend_with_blanks(const LabelSequence& z) {
  if (z.empty()) throw InvalidTargetError("extend_with_blanks: empty label sequence");
  std::vector<int> ext(2 * z.size() + 1, kBlank);
  for (std::size_t i = 0; i < z.size(); ++i) ext[2 * i + 1] = z[i];
  return ext;
}

/// Shortest frame count that can emit z: one frame per label plus a blank
/// between each pair of equal neighbours.
inline int ctc_min_frames(const LabelSequence& z) {
  int n = static_cast<int>(z.size());
  for (std::size_t i = 1; i < z.size(); ++i)
    if (z[i] == z[i - 1]) ++n;
  return n;
}

namespace detail {

template <typename Real>
void check_log_normalized(const Matrix<Real>& logprobs, const char* who) {
  const Real tol = sizeof(Real) >= 8 ? Real(1e-6) : Real(1e-3);
  for (Eigen::Index t = 0; t < logprobs.rows(); ++t) {
    const Real m = logprobs.row(t).maxCoeff();
    const Real lse = m + std::log((logprobs.row(t).array() - m).exp().sum());
    if (!std::isfinite(lse) || std::abs(lse) > tol)
      throw InternalError(str_cat(who, ": row ", t, " is not a normalized log distribution"));
  }
}

}  // namespace detail

template <typename Real>
struct CtcOutput {
  LossResult<Real> result;
  CtcTrellis<Real> trellis;
};

template <typename Real>
CtcOutput<Real> ctc_loss_and_grad(const Matrix<Real>& logprobs, const LabelSequence& z) {
  const Eigen::Index T = logprobs.rows();
  const int V = static_cast<int>(logprobs.cols());
  if (T < 1) throw ConfigError("ctc: empty input");
  validate_labels(z, V);
  detail::check_log_normalized(logprobs, "ctc");
  if (T < ctc_min_frames(z))
    throw InfeasibleTargetError(str_cat("ctc: ", T, " frames cannot emit a ", z.size(),
                                        "-label target (need ", ctc_min_frames(z), ")"));

  CtcOutput<Real> out;
  CtcTrellis<Real>& tr = out.trellis;
  tr.extended = extend_with_blanks(z);
  const std::vector<int>& ext = tr.extended;
  const int S = static_cast<int>(ext.size());
  const Real kZero = log_zero<Real>();

  auto can_skip = [&](int s) { return ext[s] != kBlank && s >= 2 && ext[s] != ext[s - 2]; };

  tr.alpha = Matrix<Real>::Constant(T, S, kZero);
  tr.alpha(0, 0) = logprobs(0, ext[0]);
  tr.alpha(0, 1) = logprobs(0, ext[1]);
  for (Eigen::Index t = 1; t < T; ++t) {
    // States below this bound cannot still reach the end in time.
    const int lo = std::max(0, S - 2 * static_cast<int>(T - t));
    const int hi = std::min(S, 2 * static_cast<int>(t) + 2);
    for (int s = lo; s < hi; ++s) {
      Real a = tr.alpha(t - 1, s);
      if (s >= 1) a = log_add(a, tr.alpha(t - 1, s - 1));
      if (can_skip(s)) a = log_add(a, tr.alpha(t - 1, s - 2));
      if (a != kZero) tr.alpha(t, s) = a + logprobs(t, ext[s]);
    }
  }

  tr.beta = Matrix<Real>::Constant(T, S, kZero);
  tr.beta(T - 1, S - 1) = logprobs(T - 1, ext[S - 1]);
  tr.beta(T - 1, S - 2) = logprobs(T - 1, ext[S - 2]);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      Real b = tr.beta(t + 1, s);
      if (s + 1 < S) b = log_add(b, tr.beta(t + 1, s + 1));
      if (s + 2 < S && ext[s] != kBlank && ext[s] != ext[s + 2])
        b = log_add(b, tr.beta(t + 1, s + 2));
      if (b != kZero) tr.beta(t, s) = b + logprobs(t, ext[s]);
    }
  }

  tr.log_likelihood = log_add(tr.alpha(T - 1, S - 1), tr.alpha(T - 1, S - 2));
  if (!std::isfinite(tr.log_likelihood))
    throw NumericError("ctc: target has zero probability under the model");
  out.result.loss = -tr.log_likelihood;

  // Occupancy per (t, symbol), then grad = y - occupancy.
  Matrix<Real>& grad = out.result.grad_logits;
  grad = logprobs.array().exp().matrix();
  std::vector<Real> occ(static_cast<std::size_t>(V));
  for (Eigen::Index t = 0; t < T; ++t) {
    std::fill(occ.begin(), occ.end(), kZero);
    for (int s = 0; s < S; ++s) {
      const Real ab = tr.alpha(t, s) + tr.beta(t, s);
      if (ab != kZero) occ[ext[s]] = log_add(occ[ext[s]], ab);
    }
    for (int k = 0; k < V; ++k)
      if (occ[k] != kZero)
        grad(t, k) -= std::exp(occ[k] - logprobs(t, k) - tr.log_likelihood);
  }
  return out;
}

/// Per-frame total log-likelihood recovered from alpha and beta. For a
/// correct trellis every entry equals trellis.log_likelihood.
template <typename Real>
std::vector<Real> trellis_consistency_check(const CtcTrellis<Real>& trellis,
                                            const Matrix<Real>& logprobs) {
  const Eigen::Index T = trellis.alpha.rows();
  const int S = static_cast<int>(trellis.extended.size());
  std::vector<Real> per_t(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    Real acc = log_zero<Real>();
    for (int s = 0; s < S; ++s) {
      const Real ab = trellis.alpha(t, s) + trellis.beta(t, s);
      if (ab != log_zero<Real>())
        acc = log_add(acc, ab - logprobs(t, trellis.extended[s]));
    }
    per_t[static_cast<std::size_t>(t)] = acc;
  }
  return per_t;
}

}  // namespace mtl
