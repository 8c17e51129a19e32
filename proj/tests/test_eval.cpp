#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "mdsrec/eval.hpp"
#include "support/oracles.hpp"

using mdsrec::ModelConfig;
using mdsrec::RankingReport;
using mdsrec::Rng;
using mdsrec::Tensor;

TEST_CASE("target rank under pessimistic tie breaking") {
  SECTION("distinct scores count the strictly better entries") {
    std::vector<double> s{5.0, 3.0, 9.0, 1.0};
    REQUIRE(mdsrec::rank_target(s.data(), 4, 2) == 1);
    REQUIRE(mdsrec::rank_target(s.data(), 4, 0) == 2);
    REQUIRE(mdsrec::rank_target(s.data(), 4, 1) == 3);
    REQUIRE(mdsrec::rank_target(s.data(), 4, 3) == 4);
  }
  SECTION("equal scores push the target behind every competitor") {
    std::vector<double> s(10, 0.25);
    for (int t = 0; t < 10; ++t) REQUIRE(mdsrec::rank_target(s.data(), 10, t) == 10);
  }
  SECTION("excluded candidates never compete") {
    std::vector<double> s{5.0, 3.0, 9.0, 1.0};
    REQUIRE(mdsrec::rank_target(s.data(), 4, 1, {2}) == 2);
    REQUIRE(mdsrec::rank_target(s.data(), 4, 1, {0, 2}) == 1);
    REQUIRE(mdsrec::rank_target(s.data(), 4, 1, {3}) == 3);
  }
  SECTION("bad inputs are rejected") {
    std::vector<double> s{1.0, 2.0};
    REQUIRE_THROWS_WITH(mdsrec::rank_target(s.data(), 0, 0),
                        Catch::Matchers::ContainsSubstring("empty score vector"));
    REQUIRE_THROWS_WITH(mdsrec::rank_target(s.data(), 2, 2),
                        Catch::Matchers::ContainsSubstring("outside [0, 2)"));
    REQUIRE_THROWS_WITH(mdsrec::rank_target(s.data(), 2, 0, {0}),
                        Catch::Matchers::ContainsSubstring("is in the exclusion set"));
    REQUIRE_THROWS_WITH(mdsrec::rank_target(s.data(), 2, 0, {5}),
                        Catch::Matchers::ContainsSubstring("exclusion 5"));
  }
  SECTION("random score vectors match the full-sort oracle") {
    Rng rng(401);
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 3 + rng.uniform_int(40);
      std::vector<double> s(static_cast<std::size_t>(n));
      for (double& v : s) v = rng.uniform_int(8) == 0 ? 0.5 : rng.normal();
      const int target = rng.uniform_int(n);
      REQUIRE(mdsrec::rank_target(s.data(), n, target) == oracles::sort_rank(s, target));
    }
  }
}

TEST_CASE("recall and ndcg at a cutoff") {
  SECTION("pinned values") {
    auto [r3, g3] = mdsrec::metrics({3}, 10);
    REQUIRE(r3 == 1.0);
    REQUIRE(g3 == Catch::Approx(0.5).margin(1e-12));
    auto [r1, g1] = mdsrec::metrics({1}, 10);
    REQUIRE(r1 == 1.0);
    REQUIRE(g1 == 1.0);
    auto [rout, gout] = mdsrec::metrics({11}, 10);
    REQUIRE(rout == 0.0);
    REQUIRE(gout == 0.0);
    auto [rm, gm] = mdsrec::metrics({1, 5, 12}, 10);
    REQUIRE(rm == Catch::Approx(2.0 / 3.0).margin(1e-12));
    REQUIRE(gm == Catch::Approx((1.0 + 1.0 / std::log2(6.0)) / 3.0).margin(1e-12));
    auto [re, ge] = mdsrec::metrics({}, 10);
    REQUIRE(re == 0.0);
    REQUIRE(ge == 0.0);
  }
  SECTION("bad inputs are rejected") {
    REQUIRE_THROWS_WITH(mdsrec::metrics({1}, 0),
                        Catch::Matchers::ContainsSubstring("cutoff must be >= 1"));
    REQUIRE_THROWS_WITH(mdsrec::metrics({0}, 10),
                        Catch::Matchers::ContainsSubstring("rank below 1"));
  }
  SECTION("random rank lists match the naive oracle and its bounds") {
    Rng rng(402);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<int> ranks(static_cast<std::size_t>(1 + rng.uniform_int(30)));
      for (int& r : ranks) r = 1 + rng.uniform_int(40);
      double prev_recall = 0.0, prev_ndcg = 0.0;
      for (int cutoff : {1, 5, 10, 20, 40}) {
        auto [r, g] = mdsrec::metrics(ranks, cutoff);
        auto [ro, go] = oracles::naive_recall_ndcg(ranks, cutoff);
        REQUIRE(r == ro);
        REQUIRE(g == go);
        REQUIRE(r >= prev_recall);
        REQUIRE(g >= prev_ndcg);
        REQUIRE(g <= r + 1e-15);
        REQUIRE(r <= 1.0);
        prev_recall = r;
        prev_ndcg = g;
      }
    }
  }
}

TEST_CASE("ranking reports expose metrics by cutoff") {
  RankingReport rep = mdsrec::make_report({3, 1}, {10, 20});
  REQUIRE(rep.n_users == 2);
  REQUIRE(rep.ranks == std::vector<int>{3, 1});
  REQUIRE(rep.recall_at(10) == 1.0);
  REQUIRE(rep.ndcg_at(10) == Catch::Approx(0.75).margin(1e-12));
  REQUIRE(rep.recall_at(20) == 1.0);
  REQUIRE_THROWS_WITH(rep.recall_at(5),
                      Catch::Matchers::ContainsSubstring("report has no cutoff 5"));

  SECTION("the csv dump is byte stable") {
    const std::string path = "/tmp/mdsrec_eval_report.csv";
    mdsrec::write_eval_report(path, rep);
    std::ifstream in(path);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    std::remove(path.c_str());
    REQUIRE(lines == std::vector<std::string>{"metric,cutoff,value", "recall,10,1", "recall,20,1",
                                              "ndcg,10,0.75", "ndcg,20,0.75"});
  }
  SECTION("the summary mentions every cutoff") {
    const std::string s = mdsrec::summarize_report(rep);
    REQUIRE(s.find("users evaluated: 2") != std::string::npos);
    REQUIRE(s.find("Recall@10") != std::string::npos);
    REQUIRE(s.find("NDCG@20") != std::string::npos);
  }
}

namespace {

struct EvalFixture {
  ModelConfig cfg;
  mdsrec::SynthResult synth;
  mdsrec::SplitDataset split;
  mdsrec::PipelineCache cache;
  mdsrec::ModelParams params;

  EvalFixture() {
    cfg.d = 8;
    cfg.max_len = 8;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.h = 2;
    cfg.k = 3;
    cfg.batch_size = 4;
    cfg.validate();
    mdsrec::SynthSpec spec;
    spec.n_users = 8;
    spec.n_items = 12;
    spec.k_true = 2;
    spec.d_visual = 4;
    spec.d_textual = 4;
    spec.len_min = 5;
    spec.len_max = 7;
    synth = mdsrec::synth_generate(spec, 29);
    split = mdsrec::split_leave_one_out(synth.dataset);
    cache = mdsrec::build_pipeline(cfg, split.train, synth.dataset.n_items, synth.visual,
                                   synth.textual, cfg.seed);
    Rng init = mdsrec::substream(cfg.seed, "init");
    params = mdsrec::init_model_params(cfg, synth.dataset.n_items, spec.d_visual,
                                       spec.d_textual, init);
  }

  RankingReport run(mdsrec::EvalSplit which) {
    auto examples = mdsrec::build_eval_examples(split, which);
    return mdsrec::evaluate_model(cfg, params, cache, synth.visual, synth.textual, examples,
                                  synth.dataset.pad_index());
  }
};

}  // namespace

TEST_CASE("model evaluation ranks every user deterministically") {
  EvalFixture f;
  RankingReport a = f.run(mdsrec::EvalSplit::valid);
  RankingReport b = f.run(mdsrec::EvalSplit::valid);
  REQUIRE(a.n_users == f.split.n_users());
  REQUIRE(a.ranks == b.ranks);
  REQUIRE(a.recall_at(10) == b.recall_at(10));
  for (int r : a.ranks) {
    REQUIRE(r >= 1);
    REQUIRE(r <= f.synth.dataset.n_items);
  }
  RankingReport t = f.run(mdsrec::EvalSplit::test);
  REQUIRE(t.n_users == f.split.n_users());
}

TEST_CASE("filtering interacted items shortens the competition") {
  EvalFixture f;
  for (auto* p : f.params.all()) p->value.fill(0.0);

  auto examples = mdsrec::build_eval_examples(f.split, mdsrec::EvalSplit::valid);
  RankingReport plain = mdsrec::evaluate_model(f.cfg, f.params, f.cache, f.synth.visual,
                                               f.synth.textual, examples,
                                               f.synth.dataset.pad_index());
  f.cfg.filter_interacted = true;
  RankingReport filtered = mdsrec::evaluate_model(f.cfg, f.params, f.cache, f.synth.visual,
                                                  f.synth.textual, examples,
                                                  f.synth.dataset.pad_index());

  const int n = f.synth.dataset.n_items;
  for (std::size_t u = 0; u < examples.size(); ++u) {
    REQUIRE(plain.ranks[u] == n);
    std::set<int> excl(examples[u].input.begin(), examples[u].input.end());
    excl.erase(examples[u].target);
    REQUIRE(filtered.ranks[u] == n - static_cast<int>(excl.size()));
  }
}
