// Copyright 2026 The attrunlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Per-dimension histograms of user embeddings split by attribute group, and
// the histogram-intersection overlap score computed from them.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"

namespace attrunlearn::analysis {

struct DimensionHistogram {
  std::vector<double> edges;      // bins + 1 entries, strictly increasing
  std::vector<std::int64_t> counts[2];
  bool degenerate = false;        // constant column, single-bin fallback

  std::size_t bins() const { return counts[0].size(); }
};

struct HistogramSet {
  std::vector<DimensionHistogram> dims;
  bool downsampled = false;
  std::uint64_t seed = 0;
  std::int64_t group_size[2] = {0, 0};  // users counted per group
};

// Rows whose group contributes to the histograms. With downsampling the
// larger group is reduced to a uniform random subset of the smaller one's
// size; the subset is returned sorted.
inline std::vector<Index> histogram_rows(const AttributeTable& labels, Label g,
                                         bool downsample, std::uint64_t seed) {
  std::vector<Index> rows = labels.group(g);
  const std::size_t target = std::min(labels.group(0).size(), labels.group(1).size());
  if (!downsample || rows.size() <= target) return rows;
  Rng rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(target);
  std::sort(rows.begin(), rows.end());
  return rows;
}

// Bin edges span the pooled min/max over all users, so they do not depend
// on the downsampling draw. The last bin is closed on the right.
inline HistogramSet embedding_histograms(const MatrixRef& theta, const AttributeTable& labels,
                                         int bins = 50, bool downsample = true,
                                         std::uint64_t seed = 0) {
  if (bins < 1) throw Error("embedding_histograms: bins must be >= 1");
  if (static_cast<std::size_t>(theta.rows()) != labels.size()) {
    throw ShapeError("embedding_histograms: embedding rows and labels differ");
  }
  labels.require_both_groups("embedding_histograms");

  HistogramSet out;
  out.downsampled = downsample;
  out.seed = seed;
  const std::vector<Index> rows[2] = {histogram_rows(labels, 0, downsample, seed),
                                      histogram_rows(labels, 1, downsample, seed)};
  for (int g = 0; g < 2; ++g) out.group_size[g] = static_cast<std::int64_t>(rows[g].size());

  out.dims.resize(static_cast<std::size_t>(theta.cols()));
  for (Eigen::Index k = 0; k < theta.cols(); ++k) {
    DimensionHistogram& h = out.dims[static_cast<std::size_t>(k)];
    const double lo = theta.col(k).minCoeff();
    const double hi = theta.col(k).maxCoeff();
    int n_bins = bins;
    h.edges.resize(static_cast<std::size_t>(n_bins) + 1);
    for (int b = 0; b <= n_bins; ++b) {
      h.edges[static_cast<std::size_t>(b)] = lo + (hi - lo) * b / n_bins;
    }
    h.edges.back() = hi;
    // A range too narrow to resolve in doubles is treated like a constant.
    h.degenerate = std::adjacent_find(h.edges.begin(), h.edges.end(),
                                      std::greater_equal<double>()) != h.edges.end();
    if (h.degenerate) {
      n_bins = 1;
      h.edges = {lo - 0.5, lo + 0.5};
    }
    for (int g = 0; g < 2; ++g) {
      h.counts[g].assign(static_cast<std::size_t>(n_bins), 0);
      for (Index u : rows[g]) {
        int b = 0;
        if (!h.degenerate) {
          b = static_cast<int>(std::floor((theta(u, k) - lo) / (hi - lo) * n_bins));
          b = std::clamp(b, 0, n_bins - 1);
        }
        ++h.counts[g][static_cast<std::size_t>(b)];
      }
    }
  }
  return out;
}

struct OverlapScore {
  std::vector<double> per_dimension;
  double mean = 0.0;
};

// Histogram intersection of two count vectors after normalizing each to
// unit mass: sum_b min(p_b, q_b). Lies in [0, 1].
inline double histogram_intersection(const std::vector<std::int64_t>& p,
                                     const std::vector<std::int64_t>& q) {
  if (p.size() != q.size()) throw ShapeError("histogram_intersection: bin counts differ");
  const double np = static_cast<double>(std::accumulate(p.begin(), p.end(), std::int64_t{0}));
  const double nq = static_cast<double>(std::accumulate(q.begin(), q.end(), std::int64_t{0}));
  if (np <= 0.0 || nq <= 0.0) throw Error("histogram_intersection: empty histogram");
  double s = 0.0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    s += std::min(static_cast<double>(p[b]) / np, static_cast<double>(q[b]) / nq);
  }
  return std::clamp(s, 0.0, 1.0);
}

inline OverlapScore overlap_score(const HistogramSet& hist) {
  OverlapScore out;
  out.per_dimension.reserve(hist.dims.size());
  for (const auto& h : hist.dims) {
    out.per_dimension.push_back(histogram_intersection(h.counts[0], h.counts[1]));
  }
  if (!out.per_dimension.empty()) {
    out.mean = std::accumulate(out.per_dimension.begin(), out.per_dimension.end(), 0.0) /
               static_cast<double>(out.per_dimension.size());
  }
  return out;
}

}  // namespace attrunlearn::analysis
