// mtl/data/transforms.hpp

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
#include <map>
#include <string>
#include <vector>

#include "mtl/data/synthetic.hpp"

namespace mtl {

enum class NormalizationMode { kMeanVariance, kMeanOnly };

constexpr double kStdFloor = 1e-8;

/// Per conversation and feature dimension: subtract the mean and (by
/// default) divide by the standard deviation, floored at 1e-8.
inline void normalize_per_conversation(std::vector<UtteranceRecord>& records,
                                       NormalizationMode mode = NormalizationMode::kMeanVariance) {
  struct Acc {
    RowVector<double> sum, sq;
    double frames = 0;
  };
  std::map<std::string, Acc> stats;
  for (const auto& r : records) {
    auto& a = stats[r.conversation_id];
    if (a.sum.size() == 0) {
      a.sum = RowVector<double>::Zero(r.features.cols());
      a.sq = RowVector<double>::Zero(r.features.cols());
    }
    if (a.sum.size() != r.features.cols())
      throw ConfigError("normalize: feature dims differ within conversation " + r.conversation_id);
    a.sum += r.features.colwise().sum();
    a.frames += static_cast<double>(r.features.rows());
  }
  std::map<std::string, RowVector<double>> means;
  for (auto& [conv, a] : stats) means[conv] = a.sum / std::max(a.frames, 1.0);
  // Second pass around the mean, which is exact for the centered data.
  for (const auto& r : records) {
    const auto& mu = means[r.conversation_id];
    stats[r.conversation_id].sq += (r.features.rowwise() - mu).array().square().matrix().colwise().sum();
  }
  for (auto& r : records) {
    const auto& a = stats[r.conversation_id];
    const auto& mu = means[r.conversation_id];
    r.features.rowwise() -= mu;
    if (mode == NormalizationMode::kMeanVariance) {
      RowVector<double> sd = (a.sq / std::max(a.frames, 1.0)).array().sqrt().max(kStdFloor).matrix();
      r.features = r.features.array().rowwise() / sd.array();
    }
  }
}

/// Temporal resampling: T' = round(T / factor) rows, row t' linearly
/// interpolated at source position t' * factor (clamped to the last frame).
template <typename Real>
Matrix<Real> speed_perturb(const Matrix<Real>& features, double factor) {
  if (!(factor >= 0.8 && factor <= 1.25))
    throw ConfigError(str_cat("speed_perturb: factor ", factor, " outside [0.8, 1.25]"));
  const Eigen::Index T = features.rows();
  if (T < 1) throw ConfigError("speed_perturb: empty input");
  const Eigen::Index out_rows =
      std::max<Eigen::Index>(1, std::llround(static_cast<double>(T) / factor));
  Matrix<Real> out(out_rows, features.cols());
  for (Eigen::Index t = 0; t < out_rows; ++t) {
    double pos = std::min(static_cast<double>(t) * factor, static_cast<double>(T - 1));
    const Eigen::Index lo = static_cast<Eigen::Index>(std::floor(pos));
    const Eigen::Index hi = std::min(lo + 1, T - 1);
    const Real frac = static_cast<Real>(pos - static_cast<double>(lo));
    out.row(t) = (Real(1) - frac) * features.row(lo) + frac * features.row(hi);
  }
  return out;
}

/// Copy of `u` with resampled features and no frame-level labels, which no
/// longer line up with the frames.
inline UtteranceRecord speed_perturb_utterance(const UtteranceRecord& u, double factor) {
  UtteranceRecord p;
  p.id = str_cat(u.id, "-sp", factor);
  p.conversation_id = u.conversation_id;
  p.features = speed_perturb(u.features, factor);
  p.ctc_labels = u.ctc_labels;
  return p;
}

}  // namespace mtl
