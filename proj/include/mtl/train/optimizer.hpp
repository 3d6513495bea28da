// mtl/train/optimizer.hpp

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
#include <numeric>
#include <string>
#include <vector>

#include "mtl/core/base.hpp"
#include "mtl/core/random.hpp"

namespace mtl {

enum class OptimizerKind { kSgd, kAdam };

template <typename Real>
void check_finite_gradients(const ParamRefs<Real>& params) {
  for (const auto* p : params)
    if (!p->grad.allFinite())
      throw NumericError("non-finite gradient in parameter " + p->name);
}

template <typename Real>
double global_grad_norm(const ParamRefs<Real>& params) {
  double sq = 0;
  for (const auto* p : params) sq += static_cast<double>(p->grad.squaredNorm());
  return std::sqrt(sq);
}

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// max_norm <= 0 disables clipping. Returns the pre-clip norm.
template <typename Real>
double clip_global_norm(const ParamRefs<Real>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm > 0 && norm > max_norm) {
    const Real scale = static_cast<Real>(max_norm / norm);
    for (auto* p : params) p->grad *= scale;
  }
  return norm;
}

template <typename Real>
void sgd_step(const ParamRefs<Real>& params, double lr) {
  check_finite_gradients(params);
  const Real step = static_cast<Real>(lr);
  for (auto* p : params) p->value -= step * p->grad;
}

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Real>
struct AdamState {
  AdamOptions options;
  long step = 0;
  std::vector<Matrix<Real>> m;
  std::vector<Matrix<Real>> v;
};

/// Adam with bias-corrected moment estimates.
template <typename Real>
void adam_step(const ParamRefs<Real>& params, double lr, AdamState<Real>& state) {
  check_finite_gradients(params);
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(Matrix<Real>::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Matrix<Real>::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != params.size()) throw InternalError("adam: parameter list changed");
  ++state.step;
  const auto& o = state.options;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  const Real b1 = static_cast<Real>(o.beta1), b2 = static_cast<Real>(o.beta2);
  const Real step_size = static_cast<Real>(lr / c1);
  const Real inv_c2 = static_cast<Real>(1.0 / c2);
  const Real eps = static_cast<Real>(o.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    state.m[i] = b1 * state.m[i] + (Real(1) - b1) * p->grad;
    state.v[i] = b2 * state.v[i] + (Real(1) - b2) * p->grad.cwiseProduct(p->grad);
    p->value.array() -=
        step_size * state.m[i].array() / ((state.v[i].array() * inv_c2).sqrt() + eps);
  }
}

template <typename Real>
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind) : kind_(kind) {}

  void step(const ParamRefs<Real>& params, double lr) {
    if (kind_ == OptimizerKind::kSgd)
      sgd_step(params, lr);
    else
      adam_step(params, lr, adam_);
  }

  OptimizerKind kind() const { return kind_; }

 private:
  OptimizerKind kind_;
  AdamState<Real> adam_;
};

/// Learning-rate schedule that decays by a fixed factor once the relative
/// cross-validation improvement drops below `threshold`; from then on it
/// decays every epoch.
struct NewBobState {
  double current_lr = 0;
  double best_cv_loss = std::numeric_limits<double>::infinity();
  bool decay_triggered = false;
  double threshold = 0.005;
  struct Entry {
    int epoch;
    double cv_loss;
    double lr;
  };
  std::vector<Entry> history;

  NewBobState() = default;
  NewBobState(double lr, double thr = 0.005) : current_lr(lr), threshold(thr) {}
};

/// Returns the learning rate for the next epoch.
inline double newbob_update(NewBobState& s, double cv_loss, double decay_factor, int epoch = 0) {
  if (!std::isfinite(cv_loss)) throw NumericError("newbob: non-finite cv loss");
  if (!(decay_factor > 0.0 && decay_factor < 1.0))
    throw ConfigError("newbob: decay factor must be in (0, 1)");
  if (!s.decay_triggered && std::isfinite(s.best_cv_loss)) {
    const double improvement = (s.best_cv_loss - cv_loss) / std::abs(s.best_cv_loss);
    if (improvement < s.threshold) s.decay_triggered = true;
  }
  if (s.decay_triggered) s.current_lr *= decay_factor;
  s.best_cv_loss = std::min(s.best_cv_loss, cv_loss);
  s.history.push_back({epoch, cv_loss, s.current_lr});
  return s.current_lr;
}

enum class Ordering { kAscending, kDescending, kRandom };

/// Stable sort by length for ascending/descending; a seeded shuffle for random.
inline std::vector<std::size_t> order_utterances(const std::vector<int>& lengths, Ordering policy,
                                                 Rng& rng) {
  std::vector<std::size_t> idx(lengths.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  switch (policy) {
    case Ordering::kAscending:
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
      break;
    case Ordering::kDescending:
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t a, std::size_t b) { return lengths[a] > lengths[b]; });
      break;
    case Ordering::kRandom:
      shuffle(idx, rng);
      break;
  }
  return idx;
}

}  // namespace mtl
