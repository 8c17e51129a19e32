#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "mdsrec/common.hpp"
#include "mdsrec/config.hpp"
#include "mdsrec/data.hpp"
#include "mdsrec/model.hpp"

// Full-catalog ranking: rank of the held-out target per user, Recall@N and
// NDCG@N at fixed cutoffs.

namespace mdsrec {

// Pessimistic competition rank: every other candidate scoring >= the target
// pushes it down one place, so ties resolve identically on every platform.
inline int rank_target(const double* scores, int n, int target,
                       const std::vector<int>& exclusions = {}) {
  require(n >= 1, "rank_target: empty score vector");
  require(target >= 0 && target < n, "rank_target: target ", target, " outside [0, ", n, ")");
  std::vector<char> skip;
  if (!exclusions.empty()) {
    skip.assign(static_cast<std::size_t>(n), 0);
    for (int e : exclusions) {
      require(e >= 0 && e < n, "rank_target: exclusion ", e, " outside [0, ", n, ")");
      require(e != target, "rank_target: target ", target, " is in the exclusion set");
      skip[static_cast<std::size_t>(e)] = 1;
    }
  }
  const double st = scores[target];
  int rank = 1;
  for (int j = 0; j < n; ++j) {
    if (j == target) continue;
    if (!skip.empty() && skip[static_cast<std::size_t>(j)]) continue;
    if (scores[j] >= st) ++rank;
  }
  return rank;
}

// recall = fraction of users whose target lands inside the cutoff;
// ndcg credits 1/log2(rank+1) inside the cutoff, 0 outside.
inline std::pair<double, double> metrics(const std::vector<int>& ranks, int n_cutoff) {
  require(n_cutoff >= 1, "metrics: cutoff must be >= 1");
  if (ranks.empty()) return {0.0, 0.0};
  double hits = 0.0, gain = 0.0;
  for (int r : ranks) {
    require(r >= 1, "metrics: rank below 1");
    if (r <= n_cutoff) {
      hits += 1.0;
      gain += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
  }
  const double n = static_cast<double>(ranks.size());
  return {hits / n, gain / n};
}

struct RankingReport {
  std::vector<int> cutoffs;
  std::vector<double> recall, ndcg;  // aligned with cutoffs
  std::vector<int> ranks;            // per evaluated user
  int n_users = 0;

  double recall_at(int n_cutoff) const { return value_at(recall, n_cutoff); }
  double ndcg_at(int n_cutoff) const { return value_at(ndcg, n_cutoff); }

 private:
  double value_at(const std::vector<double>& vals, int n_cutoff) const {
    for (std::size_t i = 0; i < cutoffs.size(); ++i)
      if (cutoffs[i] == n_cutoff) return vals[i];
    fail("report has no cutoff ", n_cutoff);
  }
};

inline RankingReport make_report(std::vector<int> ranks, std::vector<int> cutoffs = {10, 20}) {
  RankingReport rep;
  rep.cutoffs = std::move(cutoffs);
  rep.n_users = static_cast<int>(ranks.size());
  rep.ranks = std::move(ranks);
  for (int n_cutoff : rep.cutoffs) {
    auto [r, g] = metrics(rep.ranks, n_cutoff);
    rep.recall.push_back(r);
    rep.ndcg.push_back(g);
  }
  return rep;
}

// Ranks every example's target against the whole catalog using the
// noiseless forward pass. Batches keep the fixed example order, so two
// evaluations of the same frozen parameters give identical reports.
inline RankingReport evaluate_model(const ModelConfig& cfg, ModelParams& params,
                                    const PipelineCache& cache, const ModalFeatureTable& visual,
                                    const ModalFeatureTable& textual,
                                    const std::vector<TrainExample>& examples, int pad_index,
                                    std::vector<int> cutoffs = {10, 20}) {
  std::vector<int> ranks;
  ranks.reserve(examples.size());
  const auto batches = make_batches(examples, cfg.batch_size, cfg.max_len, pad_index, nullptr);
  for (const Batch& batch : batches) {
    ad::Tape tape;
    ForwardOutputs f =
        build_forward(tape, cfg, params, cache, visual, textual, batch, nullptr);
    const Tensor& scores = tape.value(f.scores);
    for (int b = 0; b < batch.size(); ++b) {
      std::vector<int> excl;
      if (cfg.filter_interacted) {
        for (int it : batch.real_items(b))
          if (it != batch.targets[static_cast<std::size_t>(b)]) excl.push_back(it);
      }
      ranks.push_back(rank_target(scores.data() + static_cast<std::int64_t>(b) * scores.dim(1),
                                  scores.dim(1), batch.targets[static_cast<std::size_t>(b)],
                                  excl));
    }
  }
  return make_report(std::move(ranks), std::move(cutoffs));
}

inline void write_eval_report(const std::string& path, const RankingReport& rep) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open ", path, " for writing");
  out << "metric,cutoff,value\n";
  for (std::size_t i = 0; i < rep.cutoffs.size(); ++i)
    out << "recall," << rep.cutoffs[i] << "," << fmt_double(rep.recall[i]) << "\n";
  for (std::size_t i = 0; i < rep.cutoffs.size(); ++i)
    out << "ndcg," << rep.cutoffs[i] << "," << fmt_double(rep.ndcg[i]) << "\n";
  require(out.good(), "write failed: ", path);
}

inline std::string summarize_report(const RankingReport& rep) {
  std::string s = strcat_all("users evaluated: ", rep.n_users, "\n");
  for (std::size_t i = 0; i < rep.cutoffs.size(); ++i) {
    char line[96];
    std::snprintf(line, sizeof(line), "Recall@%-3d %.4f   NDCG@%-3d %.4f\n", rep.cutoffs[i],
                  rep.recall[i], rep.cutoffs[i], rep.ndcg[i]);
    s += line;
  }
  return s;
}

}  // namespace mdsrec
