// mtl/model/features.hpp

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

#include <vector>

#include "mtl/core/base.hpp"
#include "mtl/losses/ctc.hpp"

namespace mtl {

/// Frame stacking with a drop: frames (2i, 2i+1) become row i, so the frame
/// rate halves and the width doubles. An odd last frame is paired with a
/// copy of itself.
template <typename Real>
Matrix<Real> downsample_features(const Matrix<Real>& features) {
  const Eigen::Index T = features.rows(), F = features.cols();
  if (T < 1) throw ConfigError("downsample_features: empty input");
  const Eigen::Index out_rows = (T + 1) / 2;
  Matrix<Real> out(out_rows, 2 * F);
  for (Eigen::Index i = 0; i < out_rows; ++i) {
    const Eigen::Index a = 2 * i;
    const Eigen::Index b = std::min(a + 1, T - 1);
    out.row(i).head(F) = features.row(a);
    out.row(i).tail(F) = features.row(b);
  }
  return out;
}

/// Frame labels matching downsample_features: row i keeps frame 2i's label.
inline FrameLabels downsample_frame_labels(const FrameLabels& labels) {
  FrameLabels out((labels.size() + 1) / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = labels[2 * i];
  return out;
}

}  // namespace mtl
