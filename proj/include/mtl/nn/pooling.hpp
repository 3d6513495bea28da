// mtl/nn/pooling.hpp

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

namespace mtl {

/// Source row chosen for each output element, row-major over the output.
struct PoolIndex {
  Eigen::Index input_rows = 0;
  Eigen::Index cols = 0;
  std::vector<Eigen::Index> source_row;
};

/// Max over non-overlapping windows of `width` consecutive rows. A short
/// tail window pools over what is left; ties go to the earlier row.
template <typename Real>
Matrix<Real> maxpool_time(const Matrix<Real>& hidden, int width = 2,
                          PoolIndex* index = nullptr) {
  const Eigen::Index T = hidden.rows(), D = hidden.cols();
  if (T < 1) throw ConfigError("maxpool_time: empty sequence");
  if (width < 1) throw ConfigError("maxpool_time: width must be >= 1");
  const Eigen::Index out_rows = (T + width - 1) / width;
  Matrix<Real> out(out_rows, D);
  if (index) {
    index->input_rows = T;
    index->cols = D;
    index->source_row.assign(static_cast<std::size_t>(out_rows * D), 0);
  }
  for (Eigen::Index r = 0; r < out_rows; ++r) {
    const Eigen::Index begin = r * width;
    const Eigen::Index end = std::min<Eigen::Index>(begin + width, T);
    for (Eigen::Index d = 0; d < D; ++d) {
      Eigen::Index best = begin;
      for (Eigen::Index t = begin + 1; t < end; ++t)
        if (hidden(t, d) > hidden(best, d)) best = t;
      out(r, d) = hidden(best, d);
      if (index) index->source_row[static_cast<std::size_t>(r * D + d)] = best;
    }
  }
  return out;
}

template <typename Real>
Matrix<Real> maxpool_time_backward(const Matrix<Real>& grad_output, const PoolIndex& index) {
  Matrix<Real> grad = Matrix<Real>::Zero(index.input_rows, index.cols);
  for (Eigen::Index r = 0; r < grad_output.rows(); ++r)
    for (Eigen::Index d = 0; d < grad_output.cols(); ++d)
      grad(index.source_row[static_cast<std::size_t>(r * index.cols + d)], d) +=
          grad_output(r, d);
  return grad;
}

}  // namespace mtl
