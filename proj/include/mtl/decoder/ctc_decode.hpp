// mtl/decoder/ctc_decode.hpp

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
#include <iomanip>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "mtl/core/base.hpp"
#include "mtl/core/log_math.hpp"
#include "mtl/losses/ctc.hpp"

namespace mtl {

struct Hypothesis {
  LabelSequence labels;  // no blanks, may be empty
  double score = 0;      // log-probability
};

/// Removes repeats, then blanks.
inline LabelSequence collapse_path(const std::vector<int>& path) {
  LabelSequence out;
  int prev = -1;
  for (int k : path) {
    if (k != prev && k != kBlank) out.push_back(k);
    prev = k;
  }
  return out;
}

/// Best path: per-frame argmax, then collapse.
template <typename Real>
LabelSequence greedy_decode(const Matrix<Real>& logprobs) {
  std::vector<int> path(static_cast<std::size_t>(logprobs.rows()));
  for (Eigen::Index t = 0; t < logprobs.rows(); ++t) {
    Eigen::Index arg;
    logprobs.row(t).maxCoeff(&arg);
    path[static_cast<std::size_t>(t)] = static_cast<int>(arg);
  }
  return collapse_path(path);
}

namespace detail {

struct PrefixScore {
  double blank = log_zero<double>();      // paths ending in blank
  double non_blank = log_zero<double>();  // paths ending in the prefix's last label
  double total() const { return log_add(blank, non_blank); }
};

// Higher score first; equal scores fall back to lexicographic prefix order.
inline bool hyp_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.labels < b.labels;
}

}  // namespace detail

/// LM-free CTC prefix beam search. Scores are exact prefix marginals when
/// the beam never prunes.
template <typename Real>
std::vector<Hypothesis> prefix_beam_search(const Matrix<Real>& logprobs, int beam) {
  if (beam < 1) throw ConfigError("prefix_beam_search: beam must be >= 1");
  const int V = static_cast<int>(logprobs.cols());
  using Beam = std::map<LabelSequence, detail::PrefixScore>;

  Beam current;
  current[{}].blank = 0.0;
  for (Eigen::Index t = 0; t < logprobs.rows(); ++t) {
    Beam next;
    for (const auto& [prefix, ps] : current) {
      const double total = ps.total();
      auto& stay = next[prefix];
      stay.blank = log_add(stay.blank, total + static_cast<double>(logprobs(t, kBlank)));
      for (int k = 1; k < V; ++k) {
        const double p = static_cast<double>(logprobs(t, k));
        LabelSequence ext = prefix;
        ext.push_back(k);
        auto& grown = next[ext];
        if (!prefix.empty() && prefix.back() == k) {
          // Repeated symbol: either collapses into the prefix or, after a
          // blank, starts a new label.
          auto& same = next[prefix];
          same.non_blank = log_add(same.non_blank, ps.non_blank + p);
          grown.non_blank = log_add(grown.non_blank, ps.blank + p);
        } else {
          grown.non_blank = log_add(grown.non_blank, total + p);
        }
      }
    }

    std::vector<Hypothesis> ranked;
    ranked.reserve(next.size());
    for (const auto& [prefix, ps] : next)
      if (ps.total() != log_zero<double>()) ranked.push_back({prefix, ps.total()});
    std::sort(ranked.begin(), ranked.end(), detail::hyp_before);
    if (static_cast<int>(ranked.size()) > beam) ranked.resize(static_cast<std::size_t>(beam));
    current.clear();
    for (const auto& h : ranked) current.emplace(h.labels, next.at(h.labels));
  }

  std::vector<Hypothesis> out;
  for (const auto& [prefix, ps] : current) out.push_back({prefix, ps.total()});
  std::sort(out.begin(), out.end(), detail::hyp_before);
  return out;
}

/// n-best lines: `utt_id rank score label1 label2 ...`, rank from 1.
inline void write_nbest(std::ostream& os, const std::string& utt_id,
                        const std::vector<Hypothesis>& hyps) {
  for (std::size_t r = 0; r < hyps.size(); ++r) {
    os << utt_id << ' ' << (r + 1) << ' ' << std::setprecision(10) << hyps[r].score;
    for (int k : hyps[r].labels) os << ' ' << k;
    os << '\n';
  }
}

}  // namespace mtl
