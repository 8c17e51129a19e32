#pragma once

#include <algorithm>
#include <climits>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "mdsrec/common.hpp"
#include "mdsrec/sparse.hpp"
#include "mdsrec/tensor.hpp"

// Co-occurrence relation extraction: reciprocal-distance pair affinities
// accumulated over user sequences into a symmetric matrix O, plus the
// behavioral-signal injection E_bar = mu * O * E + E.

namespace mdsrec {

struct CooccurrenceMatrix {
  SparseMatrix matrix;  // |X| x |X|, symmetric, zero diagonal
  std::int64_t built_from = 0;
};

// 1 / min positional distance between occurrences of a and b in seq; 0 when
// either is absent. unit_score (the distance-insensitive ablation) scores
// any co-occurring pair as 1.
inline double pair_score(const std::vector<int>& seq, int a, int b, bool unit_score = false) {
  require(a != b, "pair_score: self-affinity is undefined (i = j = ", a, ")");
  int best = -1;
  int last_a = -1, last_b = -1;
  for (int pos = 0; pos < static_cast<int>(seq.size()); ++pos) {
    const int x = seq[static_cast<std::size_t>(pos)];
    if (x == a) {
      if (last_b >= 0) best = best < 0 ? pos - last_b : std::min(best, pos - last_b);
      last_a = pos;
    } else if (x == b) {
      if (last_a >= 0) best = best < 0 ? pos - last_a : std::min(best, pos - last_a);
      last_b = pos;
    }
  }
  if (best < 0) return 0.0;
  return unit_score ? 1.0 : 1.0 / best;
}

// O_ij = sum over sequences of pair_score; each pair contributes once per
// sequence (minimum distance over occurrence pairs). Entries below `floor`
// are pruned. Works from per-item occurrence-position lists: the minimum
// distance between two items is attained at consecutive occurrences in
// merged position order, found by a two-pointer sweep.
inline CooccurrenceMatrix build_cooccurrence(const std::vector<std::vector<int>>& sequences,
                                             int n_items, bool unit_score = false,
                                             double floor = 0.0, bool row_normalize = false) {
  std::map<std::pair<int, int>, double> acc;  // keyed i < j
  for (const auto& seq : sequences) {
    std::map<int, std::vector<int>> positions;  // item -> sorted occurrence slots
    for (int pos = 0; pos < static_cast<int>(seq.size()); ++pos) {
      const int x = seq[static_cast<std::size_t>(pos)];
      require(x >= 0 && x < n_items, "build_cooccurrence: item ", x,
              " outside catalog of ", n_items);
      positions[x].push_back(pos);
    }
    for (auto ia = positions.begin(); ia != positions.end(); ++ia) {
      auto ib = ia;
      for (++ib; ib != positions.end(); ++ib) {
        const std::vector<int>& pa = ia->second;
        const std::vector<int>& pb = ib->second;
        std::size_t p = 0, q = 0;
        int best = INT_MAX;
        while (p < pa.size() && q < pb.size()) {
          best = std::min(best, std::abs(pa[p] - pb[q]));
          if (pa[p] < pb[q]) ++p;
          else ++q;
        }
        acc[{ia->first, ib->first}] += unit_score ? 1.0 : 1.0 / best;
      }
    }
  }

  std::vector<std::tuple<int, int, double>> trips;
  trips.reserve(acc.size() * 2);
  for (const auto& [key, val] : acc) {
    if (val < floor) continue;
    trips.emplace_back(key.first, key.second, val);
    trips.emplace_back(key.second, key.first, val);
  }
  CooccurrenceMatrix out;
  out.matrix = SparseMatrix::from_triplets(n_items, n_items, std::move(trips));
  out.built_from = static_cast<std::int64_t>(sequences.size());
  if (row_normalize) out.matrix = out.matrix.row_normalized();
  return out;
}

// E_bar = mu * O * E + E  (identity when mu = 0 or O = 0).
inline Tensor inject_behavior(const Tensor& features, const SparseMatrix& o, double mu) {
  require(features.rank() == 2, "inject_behavior: features must be rank-2");
  require(o.rows() == features.dim(0) && o.cols() == features.dim(0),
          "inject_behavior: O is ", o.rows(), "x", o.cols(), ", features have ",
          features.dim(0), " rows");
  require(mu >= 0.0, "inject_behavior: mu must be >= 0");
  Tensor out = o.multiply_dense(features);
  out.scale_inplace(mu);
  out.add_inplace(features);
  return out;
}

// Text dump `i<TAB>j<TAB>value`, upper triangle only, for inspection.
inline void dump_cooccurrence(const std::string& path, const CooccurrenceMatrix& o) {
  std::ofstream out(path);
  if (!out) fail_as<DataError>("cannot write ", path);
  char buf[64];
  for (int i = 0; i < o.matrix.rows(); ++i)
    for (std::size_t e = o.matrix.row_begin(i); e < o.matrix.row_end(i); ++e) {
      const int j = o.matrix.entry_col(e);
      if (j <= i) continue;
      std::snprintf(buf, sizeof(buf), "%.17g", o.matrix.entry_val(e));
      out << i << '\t' << j << '\t' << buf << '\n';
    }
  if (!out) fail_as<DataError>("failed writing ", path);
}

}  // namespace mdsrec
