#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <tuple>
#include <vector>

#include "mdsrec/common.hpp"
#include "mdsrec/rng.hpp"
#include "mdsrec/seqenc.hpp"
#include "mdsrec/sparse.hpp"
#include "mdsrec/tape.hpp"
#include "mdsrec/tensor.hpp"

// Interest centers: deterministic k-means over raw modal features, the
// row-normalized hard-assignment matrix C (so C * X is the per-cluster
// mean), and the centralized attention stack that refines centers against a
// user's per-layer sequence states with weights shared with the encoder.

namespace mdsrec {

struct ClusterAssignment {
  std::string modality;
  int k = 0;
  std::vector<int> labels;   // item -> cluster
  SparseMatrix assign;       // k x |X|, row c holds 1/|cluster c| at members
  Tensor centers;            // k x d_m (feature-space means)
  double inertia = 0.0;
  int iterations = 0;
};

namespace detail {

inline double sq_dist_row(const Tensor& a, int ra, const Tensor& b, int rb) {
  const int d = a.dim(1);
  double s = 0.0;
  for (int c = 0; c < d; ++c) {
    const double diff = a(ra, c) - b(rb, c);
    s += diff * diff;
  }
  return s;
}

}  // namespace detail

// k-means++ seeding, Lloyd iterations to an assignment fixpoint (at most
// 100), empty clusters reseeded to the point farthest from its assigned
// center. All ties break toward the lower index, so a fixed seed gives one
// exact clustering.
inline ClusterAssignment kmeans_cluster(const Tensor& features, int k, Rng& rng,
                                        const std::string& modality = "") {
  require(features.rank() == 2, "kmeans: features must be rank-2");
  const int n = features.dim(0), d = features.dim(1);
  require(k >= 1, "kmeans: k must be >= 1");
  require(k <= n, "kmeans: k (", k, ") exceeds point count (", n, ")");

  ClusterAssignment out;
  out.modality = modality;
  out.k = k;
  out.centers = Tensor({k, d});

  // k-means++: first center uniform, the rest by squared-distance sampling.
  std::vector<int> chosen;
  chosen.push_back(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  while (static_cast<int>(chosen.size()) < k) {
    const int last = chosen.back();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double dist = 0.0;
      for (int c = 0; c < d; ++c) {
        const double diff = features(i, c) - features(last, c);
        dist += diff * diff;
      }
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], dist);
      total += d2[static_cast<std::size_t>(i)];
    }
    int pick = -1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double run = 0.0;
      for (int i = 0; i < n; ++i) {
        run += d2[static_cast<std::size_t>(i)];
        if (run > target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {  // fp underrun at the tail: take the last positive mass
        for (int i = n - 1; i >= 0; --i)
          if (d2[static_cast<std::size_t>(i)] > 0.0) {
            pick = i;
            break;
          }
      }
    }
    if (pick < 0) {  // all remaining points coincide with chosen centers
      std::vector<bool> used(static_cast<std::size_t>(n), false);
      for (int c : chosen) used[static_cast<std::size_t>(c)] = true;
      for (int i = 0; i < n; ++i)
        if (!used[static_cast<std::size_t>(i)]) {
          pick = i;
          break;
        }
      if (pick < 0) pick = chosen.back();
    }
    chosen.push_back(pick);
  }
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < d; ++j) out.centers(c, j) = features(chosen[static_cast<std::size_t>(c)], j);

  out.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  double prev_inertia = std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= 100; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = detail::sq_dist_row(features, i, out.centers, 0);
      for (int c = 1; c < k; ++c) {
        const double dist = detail::sq_dist_row(features, i, out.centers, c);
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      if (out.labels[static_cast<std::size_t>(i)] != best) {
        out.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
      ++counts[static_cast<std::size_t>(best)];
      inertia += best_d;
    }

    bool repaired = false;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      // farthest point from its assigned center becomes the empty center
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        const double dist =
            detail::sq_dist_row(features, i, out.centers, out.labels[static_cast<std::size_t>(i)]);
        if (dist > far_d) {
          far_d = dist;
          far = i;
        }
      }
      --counts[static_cast<std::size_t>(out.labels[static_cast<std::size_t>(far)])];
      out.labels[static_cast<std::size_t>(far)] = c;
      ++counts[static_cast<std::size_t>(c)];
      for (int j = 0; j < d; ++j) out.centers(c, j) = features(far, j);
      repaired = true;
    }

    if (!repaired) {
      require(inertia <= prev_inertia + 1e-9 * std::max(1.0, prev_inertia),
              "kmeans: inertia increased (", prev_inertia, " -> ", inertia, ")");
      prev_inertia = inertia;
    } else {
      prev_inertia = std::numeric_limits<double>::infinity();
      changed = true;
    }
    out.inertia = inertia;
    out.iterations = iter;
    if (!changed && iter > 1) break;

    // update step: centers become cluster means
    Tensor sums({k, d});
    for (int i = 0; i < n; ++i) {
      const int c = out.labels[static_cast<std::size_t>(i)];
      for (int j = 0; j < d; ++j) sums(c, j) += features(i, j);
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) continue;
      for (int j = 0; j < d; ++j)
        out.centers(c, j) = sums(c, j) / counts[static_cast<std::size_t>(c)];
    }
  }

  // final inertia against the final centers
  double inertia = 0.0;
  for (int i = 0; i < n; ++i)
    inertia += detail::sq_dist_row(features, i, out.centers, out.labels[static_cast<std::size_t>(i)]);
  out.inertia = inertia;

  std::vector<std::tuple<int, int, double>> trips;
  trips.reserve(static_cast<std::size_t>(n));
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < n; ++i) ++sizes[static_cast<std::size_t>(out.labels[static_cast<std::size_t>(i)])];
  for (int i = 0; i < n; ++i) {
    const int c = out.labels[static_cast<std::size_t>(i)];
    trips.emplace_back(c, i, 1.0 / sizes[static_cast<std::size_t>(c)]);
  }
  out.assign = SparseMatrix::from_triplets(k, n, std::move(trips));
  return out;
}

// Cluster means of item representations: centers = C * X, differentiable
// into X (and through it, the ID table).
inline ad::Var center_features(ad::Tape& tape, const SparseMatrix& assign, ad::Var item_reps) {
  require(assign.cols() == tape.value(item_reps).dim(0), "center_features: C has ",
          assign.cols(), " columns, representations have ", tape.value(item_reps).dim(0),
          " rows");
  return tape.spmm(assign, item_reps);
}

// Centralized attention: centers (k x d) query one user's layer-aligned
// sequence states with the encoder's own Q/K/V/mix/FFN tensors, so gradients
// reach those tensors from both paths. Logits are scaled by 1/sqrt(d); the
// center update is the residual-free feed-forward sigma((g W1 + b1) W2 + b2).
inline ad::Var centralize_user(ad::Tape& tape, ad::Var centers0,
                               const std::vector<ad::Var>& states,
                               const std::vector<BlockVars>& blocks, ad::Activation act) {
  require(states.size() >= blocks.size() + 1,
          "centralize_user: need layer states 0..L-1, got ", states.size(), " for ",
          blocks.size(), " blocks");
  const int d = tape.value(centers0).dim(1);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  ad::Var centers = centers0;
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const BlockVars& b = blocks[l];
    ad::Var seq_state = states[l];
    std::vector<ad::Var> head_outs;
    for (const auto& h : b.heads) {
      ad::Var q = tape.matmul(centers, h[0]);
      ad::Var k = tape.matmul(seq_state, h[1]);
      ad::Var v = tape.matmul(seq_state, h[2]);
      ad::Var attn = tape.row_softmax(tape.scale(tape.matmul(q, tape.transpose(k)), scale));
      head_outs.push_back(tape.matmul(attn, v));
    }
    ad::Var g = tape.matmul(tape.concat_cols(head_outs), b.mix);
    ad::Var inner = tape.add_rowvec(tape.matmul(g, b.w1), b.b1);
    centers = tape.activate(tape.add_rowvec(tape.matmul(inner, b.w2), b.b2), act);
  }
  return centers;
}

// Item -> cluster id dump, one modality per call.
inline void dump_clusters(const std::string& path, const ClusterAssignment& a) {
  std::ofstream out(path);
  if (!out) fail_as<DataError>("cannot write ", path);
  for (std::size_t i = 0; i < a.labels.size(); ++i) out << i << '\t' << a.labels[i] << '\n';
  if (!out) fail_as<DataError>("failed writing ", path);
}

}  // namespace mdsrec
