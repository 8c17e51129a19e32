#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mdsrec/common.hpp"
#include "mdsrec/sparse.hpp"
#include "mdsrec/tensor.hpp"

// Modal-aware relation graphs: cosine affinities over (behavior-injected)
// modal features, binary top-H adjacency per item, and the one-layer light
// graph convolution onto ID embeddings.

namespace mdsrec {

struct RelationGraph {
  std::string modality;
  SparseMatrix adjacency;  // values all 1 (or 1/H with row scaling)
  int h = 0;               // effective neighbors per row
  int cold_rows = 0;       // zero-norm feature rows (neighbors are arbitrary)
  bool clamped = false;    // requested H exceeded |X|-1
};

inline double cosine_affinity(const Tensor& features, int i, int j) {
  const int d = features.dim(1);
  double dot = 0.0, ni = 0.0, nj = 0.0;
  for (int c = 0; c < d; ++c) {
    dot += features(i, c) * features(j, c);
    ni += features(i, c) * features(i, c);
    nj += features(j, c) * features(j, c);
  }
  if (ni == 0.0 || nj == 0.0) return 0.0;
  return dot / (std::sqrt(ni) * std::sqrt(nj));
}

// Row i keeps the min(H, |X|-1) items j != i with the largest cosine
// affinity; ties prefer the smaller index. Affinities are replaced by 1.
// Scores are computed one row block at a time against pre-normalized rows,
// so memory stays at O(block * |X|).
inline RelationGraph build_topH_graph(const Tensor& features, int h,
                                      const std::string& modality = "",
                                      bool row_scale = false) {
  require(features.rank() == 2, "build_topH_graph: features must be rank-2");
  require(h >= 0, "build_topH_graph: H must be >= 0");
  const int n = features.dim(0), d = features.dim(1);

  RelationGraph g;
  g.modality = modality;
  g.h = std::min(h, n - 1);
  g.clamped = h > n - 1;

  std::vector<double> norm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int c = 0; c < d; ++c) sq += features(i, c) * features(i, c);
    if (sq == 0.0) ++g.cold_rows;
    norm[static_cast<std::size_t>(i)] = std::sqrt(sq);
  }

  std::vector<std::tuple<int, int, double>> trips;
  trips.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(std::max(g.h, 0)));
  const double val = row_scale && g.h > 0 ? 1.0 / g.h : 1.0;
  auto better = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  };

  std::vector<std::pair<double, int>> cand(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double ni = norm[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += features(i, c) * features(j, c);
      const double nj = norm[static_cast<std::size_t>(j)];
      cand[static_cast<std::size_t>(j)] = {ni == 0.0 || nj == 0.0 ? 0.0 : dot / (ni * nj), j};
    }
    cand[static_cast<std::size_t>(i)] = {-std::numeric_limits<double>::infinity(), i};
    if (g.h > 0) {
      std::nth_element(cand.begin(), cand.begin() + (g.h - 1), cand.end(), better);
      std::sort(cand.begin(), cand.begin() + g.h, better);
      for (int r = 0; r < g.h; ++r)
        trips.emplace_back(i, cand[static_cast<std::size_t>(r)].second, val);
    }
  }
  g.adjacency = SparseMatrix::from_triplets(n, n, std::move(trips));
  return g;
}

// One-layer light graph convolution: each item's representation becomes the
// sum of its neighbors' ID embeddings. Differentiable via the tape's spmm.
inline Tensor graph_convolve(const RelationGraph& g, const Tensor& id_embeddings) {
  require(id_embeddings.rank() == 2 && id_embeddings.dim(0) == g.adjacency.cols(),
          "graph_convolve: embeddings have ", id_embeddings.dim(0), " rows, graph expects ",
          g.adjacency.cols());
  return g.adjacency.multiply_dense(id_embeddings);
}

// Per-row neighbor list dump: `i<TAB>j1 j2 ...`.
inline void dump_graph(const std::string& path, const RelationGraph& g) {
  std::ofstream out(path);
  if (!out) fail_as<DataError>("cannot write ", path);
  for (int i = 0; i < g.adjacency.rows(); ++i) {
    out << i << '\t';
    bool first = true;
    for (std::size_t e = g.adjacency.row_begin(i); e < g.adjacency.row_end(i); ++e) {
      if (!first) out << ' ';
      out << g.adjacency.entry_col(e);
      first = false;
    }
    out << '\n';
  }
  if (!out) fail_as<DataError>("failed writing ", path);
}

}  // namespace mdsrec
