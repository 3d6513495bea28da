// mtl/nn/bilstm.hpp

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

#include <string>
#include <vector>

#include "mtl/nn/dropout.hpp"
#include "mtl/nn/lstm.hpp"

namespace mtl {

template <typename Real>
struct BiLstmLayer {
  LstmLayerParams<Real> fwd;
  LstmLayerParams<Real> bwd;

  BiLstmLayer() = default;
  BiLstmLayer(const std::string& name, int input_dim, int hidden_dim)
      : fwd(name + ".fwd", input_dim, hidden_dim, Direction::kForward),
        bwd(name + ".bwd", input_dim, hidden_dim, Direction::kBackward) {}

  int input_dim() const { return fwd.input_dim(); }
  int output_dim() const { return 2 * fwd.hidden_dim(); }
};

template <typename Real>
struct BiLstmStackCache {
  std::vector<LstmCache<Real>> fwd;
  std::vector<LstmCache<Real>> bwd;
  std::vector<Matrix<Real>> dropout_masks;  // one per inter-layer boundary, empty if off
};

/// Forward and backward hidden states concatenated per frame: [h_fwd | h_bwd].
template <typename Real>
Matrix<Real> concat_directions(const Matrix<Real>& f, const Matrix<Real>& b) {
  Matrix<Real> out(f.rows(), f.cols() + b.cols());
  out.leftCols(f.cols()) = f;
  out.rightCols(b.cols()) = b;
  return out;
}

/// Stack of bidirectional layers. Dropout, when enabled, is applied to the
/// activations passed from one layer to the next (not on recurrent
/// connections, not on the stack output).
template <typename Real>
struct BiLstmStack {
  std::vector<BiLstmLayer<Real>> layers;

  BiLstmStack() = default;
  BiLstmStack(const std::string& name, int input_dim, int hidden_dim, int num_layers) {
    require(num_layers >= 0, "bilstm: negative layer count");
    int in = input_dim;
    for (int k = 0; k < num_layers; ++k) {
      layers.emplace_back(str_cat(name, ".l", k), in, hidden_dim);
      in = 2 * hidden_dim;
    }
  }

  int depth() const { return static_cast<int>(layers.size()); }
  int output_dim() const { return layers.empty() ? 0 : layers.back().output_dim(); }

  void init(Rng& rng) {
    for (auto& l : layers) {
      l.fwd.init(rng);
      l.bwd.init(rng);
    }
  }

  void collect(ParamRefs<Real>& out) {
    for (auto& l : layers) {
      l.fwd.collect(out);
      l.bwd.collect(out);
    }
  }

  void check_chain() const {
    for (std::size_t k = 1; k < layers.size(); ++k) {
      if (layers[k].input_dim() != layers[k - 1].output_dim())
        throw ConfigError(str_cat("bilstm: layer ", k, " input dim ", layers[k].input_dim(),
                                  " != previous output dim ", layers[k - 1].output_dim()));
      if (layers[k].fwd.input_dim() != layers[k].bwd.input_dim() ||
          layers[k].fwd.hidden_dim() != layers[k].bwd.hidden_dim())
        throw ConfigError(str_cat("bilstm: layer ", k, " direction shapes differ"));
    }
  }

  Matrix<Real> forward(const Matrix<Real>& seq, double dropout_rate, bool training,
                       Rng* rng, BiLstmStackCache<Real>* cache = nullptr) const {
    check_chain();
    const bool use_dropout = training && dropout_rate > 0.0;
    if (use_dropout && rng == nullptr) throw ConfigError("bilstm: dropout needs an rng");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw ConfigError(str_cat("dropout rate must be in [0, 1), got ", dropout_rate));
    if (cache) {
      cache->fwd.assign(layers.size(), {});
      cache->bwd.assign(layers.size(), {});
      cache->dropout_masks.assign(layers.empty() ? 0 : layers.size() - 1, {});
    }
    Matrix<Real> x = seq;
    for (std::size_t k = 0; k < layers.size(); ++k) {
      if (k > 0 && use_dropout) {
        DropoutResult<Real> d = dropout_apply(x, dropout_rate, *rng);
        x = std::move(d.output);
        if (cache) cache->dropout_masks[k - 1] = std::move(d.mask);
      }
      Matrix<Real> hf = lstm_forward(x, layers[k].fwd, cache ? &cache->fwd[k] : nullptr);
      Matrix<Real> hb = lstm_forward(x, layers[k].bwd, cache ? &cache->bwd[k] : nullptr);
      x = concat_directions(hf, hb);
    }
    return x;
  }

  Matrix<Real> backward(const BiLstmStackCache<Real>& cache, const Matrix<Real>& grad) {
    if (cache.fwd.size() != layers.size())
      throw InternalError("bilstm backward: cache depth mismatch");
    Matrix<Real> g = grad;
    for (std::size_t k = layers.size(); k-- > 0;) {
      const int h = layers[k].fwd.hidden_dim();
      Matrix<Real> gf = g.leftCols(h);
      Matrix<Real> gb = g.rightCols(h);
      g = lstm_backward(cache.fwd[k], gf, layers[k].fwd);
      g += lstm_backward(cache.bwd[k], gb, layers[k].bwd);
      if (k > 0 && cache.dropout_masks[k - 1].size() > 0)
        g = dropout_backward(g, cache.dropout_masks[k - 1]);
    }
    return g;
  }
};

}  // namespace mtl
