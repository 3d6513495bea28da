// tests/test_util.hpp

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

// Reference implementations used as test oracles. They are written
// independently of the library code: plain loops, exhaustive enumeration,
// no shared helpers beyond the Matrix type.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mtl/core/base.hpp"
#include "mtl/core/random.hpp"

namespace mtl::testing {

/// Log-probability table with rows drawn from a softmax of N(0, scale) logits.
inline Matrix<double> random_logprobs(int T, int V, Rng& rng, double scale = 1.5) {
  Matrix<double> m(T, V);
  for (int t = 0; t < T; ++t) {
    double mx = -1e300;
    std::vector<double> row(static_cast<std::size_t>(V));
    for (auto& x : row) {
      x = scale * rng.normal();
      mx = std::max(mx, x);
    }
    double s = 0;
    for (double x : row) s += std::exp(x - mx);
    for (int v = 0; v < V; ++v) m(t, v) = row[static_cast<std::size_t>(v)] - mx - std::log(s);
  }
  return m;
}

/// Calls fn(path) for every path in {0..V-1}^T.
inline void for_each_path(int T, int V, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> path(static_cast<std::size_t>(T), 0);
  while (true) {
    fn(path);
    int t = T - 1;
    while (t >= 0 && path[static_cast<std::size_t>(t)] == V - 1) path[static_cast<std::size_t>(t--)] = 0;
    if (t < 0) return;
    ++path[static_cast<std::size_t>(t)];
  }
}

/// Merge repeats, drop blank 0.
inline std::vector<int> naive_collapse(const std::vector<int>& path) {
  std::vector<int> merged;
  for (std::size_t t = 0; t < path.size(); ++t)
    if (t == 0 || path[t] != path[t - 1]) merged.push_back(path[t]);
  std::vector<int> out;
  for (int k : merged)
    if (k != 0) out.push_back(k);
  return out;
}

/// log of the summed probability of all paths collapsing to each sequence.
inline std::map<std::vector<int>, double> collapsed_log_marginals(const Matrix<double>& lp) {
  const int T = static_cast<int>(lp.rows()), V = static_cast<int>(lp.cols());
  std::map<std::vector<int>, double> probs;
  for_each_path(T, V, [&](const std::vector<int>& path) {
    double s = 0;
    for (int t = 0; t < T; ++t) s += lp(t, path[static_cast<std::size_t>(t)]);
    probs[naive_collapse(path)] += std::exp(s);
  });
  std::map<std::vector<int>, double> out;
  for (const auto& [k, p] : probs) out[k] = std::log(p);
  return out;
}

/// -log P(z | x) by enumerating all V^T paths. Infinity when no path fits.
inline double brute_force_ctc_loss(const Matrix<double>& lp, const std::vector<int>& z) {
  const int T = static_cast<int>(lp.rows()), V = static_cast<int>(lp.cols());
  // Sum in log space via a running max so tiny instances stay exact.
  std::vector<double> logs;
  for_each_path(T, V, [&](const std::vector<int>& path) {
    if (naive_collapse(path) != z) return;
    double s = 0;
    for (int t = 0; t < T; ++t) s += lp(t, path[static_cast<std::size_t>(t)]);
    logs.push_back(s);
  });
  if (logs.empty()) return std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(logs.begin(), logs.end());
  double acc = 0;
  for (double l : logs) acc += std::exp(l - mx);
  return -(mx + std::log(acc));
}

/// Plain recursive Levenshtein distance.
inline int naive_edit_distance(const std::vector<int>& a, std::size_t i, const std::vector<int>& b,
                               std::size_t j) {
  if (i == a.size()) return static_cast<int>(b.size() - j);
  if (j == b.size()) return static_cast<int>(a.size() - i);
  const int sub = naive_edit_distance(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  const int del = naive_edit_distance(a, i + 1, b, j) + 1;
  const int ins = naive_edit_distance(a, i, b, j + 1) + 1;
  return std::min({sub, del, ins});
}

inline int naive_edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  return naive_edit_distance(a, 0, b, 0);
}

/// ||a - n|| / max(||a||, ||n||), with both vectors near zero counting as a match.
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nn));
  if (denom < 1e-10) return std::sqrt(diff);
  return std::sqrt(diff) / denom;
}

/// Central differences of `loss` with respect to every entry of `x`.
inline std::vector<double> numeric_gradient(Matrix<double>& x, const std::function<double()>& loss,
                                            double h = 1e-5) {
  std::vector<double> g(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + h;
    const double up = loss();
    x.data()[i] = orig - h;
    const double down = loss();
    x.data()[i] = orig;
    g[static_cast<std::size_t>(i)] = (up - down) / (2 * h);
  }
  return g;
}

inline std::vector<double> flatten(const Matrix<double>& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

/// Relative error over several tensors at once: analytic grads are read
/// from `grads`, numeric ones are taken by perturbing `values`.
inline double gradient_check(const std::vector<Matrix<double>*>& values,
                             const std::vector<const Matrix<double>*>& grads,
                             const std::function<double()>& loss, double h = 1e-5) {
  std::vector<double> a, n;
  for (const auto* g : grads) {
    const auto ak = flatten(*g);
    a.insert(a.end(), ak.begin(), ak.end());
  }
  for (auto* v : values) {
    const auto nk = numeric_gradient(*v, loss, h);
    n.insert(n.end(), nk.begin(), nk.end());
  }
  return relative_error(a, n);
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
}

/// Fresh, empty scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("mtl-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace mtl::testing
