// mtl/decoder/edit_distance.hpp

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

#include <utility>
#include <vector>

#include "mtl/losses/ctc.hpp"

namespace mtl {

struct EditStats {
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_length = 0;

  int errors() const { return substitutions + deletions + insertions; }
  double error_rate() const {
    return ref_length == 0 ? (errors() == 0 ? 0.0 : 1.0)
                           : static_cast<double>(errors()) / ref_length;
  }

  EditStats& operator+=(const EditStats& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    ref_length += o.ref_length;
    return *this;
  }
};

/// Levenshtein alignment with unit costs. Among minimal alignments the one
/// with the most substitutions is reported; (cost, substitutions) then fixes
/// D and I, which makes the counts symmetric under swapping ref and hyp.
inline EditStats edit_distance(const LabelSequence& ref, const LabelSequence& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  // Cell value: (cost, -substitutions), compared lexicographically.
  using Cell = std::pair<int, int>;
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = {static_cast<int>(j), 0};
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = {static_cast<int>(i), 0};
    for (std::size_t j = 1; j <= m; ++j) {
      Cell diag = prev[j - 1];
      if (ref[i - 1] != hyp[j - 1]) {
        diag.first += 1;
        diag.second -= 1;
      }
      Cell del = {prev[j].first + 1, prev[j].second};
      Cell ins = {cur[j - 1].first + 1, cur[j - 1].second};
      cur[j] = std::min({diag, del, ins});
    }
    std::swap(prev, cur);
  }
  const int cost = prev[m].first;
  const int subs = -prev[m].second;
  EditStats st;
  st.substitutions = subs;
  st.ref_length = static_cast<int>(n);
  // D + I = cost - S and D - I = |ref| - |hyp|.
  const int d_plus_i = cost - subs;
  const int d_minus_i = static_cast<int>(n) - static_cast<int>(m);
  st.deletions = (d_plus_i + d_minus_i) / 2;
  st.insertions = (d_plus_i - d_minus_i) / 2;
  return st;
}

}  // namespace mtl
