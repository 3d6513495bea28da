// mtl/nn/lstm.hpp

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

// Single-direction LSTM layer without peepholes:
//
//   [a_i a_f a_g a_o] = x_t W_x + h_{t-1} W_h + b
//   i = sig(a_i)  f = sig(a_f)  g = tanh(a_g)  o = sig(a_o)
//   c_t = f * c_{t-1} + i * g
//   h_t = o * tanh(c_t)
//
// Gate blocks are laid out in the order i, f, g, o along the 4H axis.
// A backward-direction layer consumes frames T-1 .. 0; its output rows are
// stored in input order so that row t always belongs to frame t.

#pragma once

#include <string>

#include "mtl/core/base.hpp"
#include "mtl/core/random.hpp"
#include "mtl/nn/activations.hpp"
#include "mtl/nn/linear.hpp"

namespace mtl {

enum class Direction { kForward, kBackward };

inline const char* direction_name(Direction d) {
  return d == Direction::kForward ? "fwd" : "bwd";
}

template <typename Real>
struct LstmLayerParams {
  Parameter<Real> w_input;   // D x 4H
  Parameter<Real> w_hidden;  // H x 4H
  Parameter<Real> bias;      // 1 x 4H
  Direction direction = Direction::kForward;

  LstmLayerParams() = default;
  LstmLayerParams(const std::string& name, int input_dim, int hidden_dim, Direction dir)
      : w_input(name + ".w_input", input_dim, 4 * hidden_dim),
        w_hidden(name + ".w_hidden", hidden_dim, 4 * hidden_dim),
        bias(name + ".bias", 1, 4 * hidden_dim),
        direction(dir) {
    require(input_dim >= 1 && hidden_dim >= 1, "lstm: dimensions must be >= 1");
  }

  int input_dim() const { return static_cast<int>(w_input.value.rows()); }
  int hidden_dim() const { return static_cast<int>(w_hidden.value.rows()); }

  /// Uniform fan-in init; forget-gate bias starts at +1.
  void init(Rng& rng) {
    const int fan_in = input_dim() + hidden_dim();
    init_uniform_fan_in(w_input.value, fan_in, rng);
    init_uniform_fan_in(w_hidden.value, fan_in, rng);
    init_uniform_fan_in(bias.value, fan_in, rng);
    const int h = hidden_dim();
    bias.value.block(0, h, 1, h).setConstant(Real(1));
  }

  void collect(ParamRefs<Real>& out) {
    out.push_back(&w_input);
    out.push_back(&w_hidden);
    out.push_back(&bias);
  }
};

template <typename Real>
struct LstmCache {
  const LstmLayerParams<Real>* owner = nullptr;
  Matrix<Real> input;      // T x D
  Matrix<Real> gates;      // T x 4H, post-nonlinearity
  Matrix<Real> cell;       // T x H
  Matrix<Real> cell_tanh;  // T x H
  Matrix<Real> hidden;     // T x H

  Eigen::Index length() const { return hidden.rows(); }
};

namespace detail {

template <typename Row>
void activate_gates(Row&& pre, int h) {
  for (int k = 0; k < h; ++k) {
    pre(k) = sigmoid(pre(k));
    pre(h + k) = sigmoid(pre(h + k));
    pre(2 * h + k) = std::tanh(pre(2 * h + k));
    pre(3 * h + k) = sigmoid(pre(3 * h + k));
  }
}

// Given dL/dh and the carried dL/dc for one step, writes the pre-activation
// gate gradient and the cell gradient flowing to the previous step.
template <typename Real, typename GateRow, typename OutRow>
void gate_backward(const GateRow& gates, const RowVector<Real>& cell_tanh,
                   const RowVector<Real>& c_prev, const RowVector<Real>& dh,
                   const RowVector<Real>& dc_next, int h, OutRow&& dgates,
                   RowVector<Real>& dc_prev) {
  for (int k = 0; k < h; ++k) {
    const Real i = gates(k), f = gates(h + k), g = gates(2 * h + k), o = gates(3 * h + k);
    const Real tc = cell_tanh(k);
    const Real d_o = dh(k) * tc;
    const Real dc = dh(k) * o * (Real(1) - tc * tc) + dc_next(k);
    dgates(k) = dc * g * i * (Real(1) - i);
    dgates(h + k) = dc * c_prev(k) * f * (Real(1) - f);
    dgates(2 * h + k) = dc * i * (Real(1) - g * g);
    dgates(3 * h + k) = d_o * o * (Real(1) - o);
    dc_prev(k) = dc * f;
  }
}

}  // namespace detail

/// Runs the layer over a whole sequence; fills `cache` for lstm_backward.
template <typename Real>
Matrix<Real> lstm_forward(const Matrix<Real>& seq, const LstmLayerParams<Real>& params,
                          LstmCache<Real>* cache = nullptr) {
  const Eigen::Index T = seq.rows();
  const int h = params.hidden_dim();
  if (T < 1) throw ConfigError("lstm_forward: empty sequence");
  if (seq.cols() != params.input_dim())
    throw ConfigError(str_cat("lstm_forward: input dim ", seq.cols(), " != ",
                              params.input_dim()));

  Matrix<Real> gates = seq * params.w_input.value;
  gates.rowwise() += params.bias.value.row(0);
  Matrix<Real> cell(T, h), cell_tanh(T, h), hidden(T, h);

  const bool fwd = params.direction == Direction::kForward;
  RowVector<Real> h_prev = RowVector<Real>::Zero(h);
  RowVector<Real> c_prev = RowVector<Real>::Zero(h);
  for (Eigen::Index step = 0; step < T; ++step) {
    const Eigen::Index t = fwd ? step : T - 1 - step;
    if (step > 0) gates.row(t).noalias() += h_prev * params.w_hidden.value;
    detail::activate_gates(gates.row(t), h);
    auto g = gates.row(t);
    for (int k = 0; k < h; ++k) {
      const Real c = g(h + k) * c_prev(k) + g(k) * g(2 * h + k);
      cell(t, k) = c;
      cell_tanh(t, k) = std::tanh(c);
      hidden(t, k) = g(3 * h + k) * cell_tanh(t, k);
    }
    h_prev = hidden.row(t);
    c_prev = cell.row(t);
  }

  if (cache) {
    cache->owner = &params;
    cache->input = seq;
    cache->gates = std::move(gates);
    cache->cell = std::move(cell);
    cache->cell_tanh = std::move(cell_tanh);
    cache->hidden = hidden;
  }
  return hidden;
}

/// Backprop through time. Accumulates into the params' gradients and returns
/// the gradient w.r.t. the input sequence.
template <typename Real>
Matrix<Real> lstm_backward(const LstmCache<Real>& cache, const Matrix<Real>& grad_hidden,
                           LstmLayerParams<Real>& params) {
  const Eigen::Index T = cache.length();
  const int h = params.hidden_dim();
  if (cache.owner != &params || cache.input.cols() != params.input_dim() ||
      cache.hidden.cols() != h)
    throw InternalError("lstm_backward: cache was not produced by these parameters");
  if (grad_hidden.rows() != T || grad_hidden.cols() != h)
    throw InternalError("lstm_backward: gradient shape does not match cache");

  const bool fwd = params.direction == Direction::kForward;
  Matrix<Real> dgates(T, 4 * h);
  Matrix<Real> h_prev_all = Matrix<Real>::Zero(T, h);
  RowVector<Real> dh_next = RowVector<Real>::Zero(h);
  RowVector<Real> dc_next = RowVector<Real>::Zero(h);
  RowVector<Real> dc_prev(h), dh(h), c_prev(h), tc(h);

  for (Eigen::Index step = T - 1; step >= 0; --step) {
    const Eigen::Index t = fwd ? step : T - 1 - step;
    const bool has_prev = step > 0;
    const Eigen::Index prev = fwd ? t - 1 : t + 1;
    if (has_prev) {
      c_prev = cache.cell.row(prev);
      h_prev_all.row(t) = cache.hidden.row(prev);
    } else {
      c_prev.setZero();
    }
    dh = grad_hidden.row(t) + dh_next;
    tc = cache.cell_tanh.row(t);
    detail::gate_backward<Real>(cache.gates.row(t), tc, c_prev, dh, dc_next, h,
                                dgates.row(t), dc_prev);
    dc_next = dc_prev;
    dh_next.noalias() = dgates.row(t) * params.w_hidden.value.transpose();
  }

  params.w_hidden.grad.noalias() += h_prev_all.transpose() * dgates;
  params.w_input.grad.noalias() += cache.input.transpose() * dgates;
  params.bias.grad += dgates.colwise().sum();
  return dgates * params.w_input.value.transpose();
}

/// State carried between single decoder steps.
template <typename Real>
struct LstmState {
  RowVector<Real> h;
  RowVector<Real> c;

  static LstmState zeros(int hidden) {
    return {RowVector<Real>::Zero(hidden), RowVector<Real>::Zero(hidden)};
  }
};

template <typename Real>
struct LstmStepCache {
  RowVector<Real> x;
  LstmState<Real> prev;
  RowVector<Real> gates;
  RowVector<Real> cell_tanh;
};

/// One step of a unidirectional layer (the direction field is ignored).
template <typename Real>
LstmState<Real> lstm_step_forward(const LstmLayerParams<Real>& params,
                                  const RowVector<Real>& x, const LstmState<Real>& prev,
                                  LstmStepCache<Real>* cache = nullptr) {
  const int h = params.hidden_dim();
  if (x.size() != params.input_dim())
    throw ConfigError(str_cat("lstm step: input dim ", x.size(), " != ", params.input_dim()));
  RowVector<Real> gates = x * params.w_input.value + prev.h * params.w_hidden.value +
                          params.bias.value.row(0);
  detail::activate_gates(gates, h);
  LstmState<Real> next{RowVector<Real>(h), RowVector<Real>(h)};
  RowVector<Real> tc(h);
  for (int k = 0; k < h; ++k) {
    next.c(k) = gates(h + k) * prev.c(k) + gates(k) * gates(2 * h + k);
    tc(k) = std::tanh(next.c(k));
    next.h(k) = gates(3 * h + k) * tc(k);
  }
  if (cache) {
    cache->x = x;
    cache->prev = prev;
    cache->gates = std::move(gates);
    cache->cell_tanh = std::move(tc);
  }
  return next;
}

/// Backward of one step. dh / dc are the total gradients w.r.t. this step's
/// outputs; returns the gradients w.r.t. the input and the previous state.
template <typename Real>
RowVector<Real> lstm_step_backward(LstmLayerParams<Real>& params,
                                   const LstmStepCache<Real>& cache,
                                   const RowVector<Real>& dh, const RowVector<Real>& dc,
                                   LstmState<Real>& grad_prev) {
  const int h = params.hidden_dim();
  RowVector<Real> dgates(4 * h);
  grad_prev.c.resize(h);
  detail::gate_backward<Real>(cache.gates, cache.cell_tanh, cache.prev.c, dh, dc, h,
                              dgates, grad_prev.c);
  params.w_input.grad.noalias() += cache.x.transpose() * dgates;
  params.w_hidden.grad.noalias() += cache.prev.h.transpose() * dgates;
  params.bias.grad += dgates;
  grad_prev.h = dgates * params.w_hidden.value.transpose();
  return dgates * params.w_input.value.transpose();
}

}  // namespace mtl
