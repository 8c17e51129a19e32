#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "mdsrec/cooccur.hpp"
#include "mdsrec/rng.hpp"
#include "support/oracles.hpp"

using mdsrec::CooccurrenceMatrix;
using mdsrec::Rng;
using mdsrec::SparseMatrix;
using mdsrec::Tensor;

TEST_CASE("pair affinity is the reciprocal minimum distance") {
  const std::vector<int> seq{0, 1, 2};
  REQUIRE(mdsrec::pair_score(seq, 0, 1) == 1.0);
  REQUIRE(mdsrec::pair_score(seq, 1, 0) == 1.0);
  REQUIRE(mdsrec::pair_score(seq, 0, 2) == 0.5);
  REQUIRE(mdsrec::pair_score(seq, 0, 3) == 0.0);  // absent item

  SECTION("repeats use the closest occurrence pair") {
    const std::vector<int> rep{0, 9, 9, 1, 0};  // distance 1 via the trailing 0
    REQUIRE(mdsrec::pair_score(rep, 0, 1) == 1.0);
    REQUIRE(mdsrec::pair_score(rep, 9, 1) == 1.0);
    REQUIRE(mdsrec::pair_score(rep, 0, 9) == 1.0);
  }
  SECTION("unit scoring flattens distance") {
    REQUIRE(mdsrec::pair_score(seq, 0, 2, true) == 1.0);
    REQUIRE(mdsrec::pair_score(seq, 0, 3, true) == 0.0);
  }
  SECTION("self affinity is rejected") {
    REQUIRE_THROWS(mdsrec::pair_score(seq, 1, 1));
  }
}

TEST_CASE("co-occurrence accumulates per-sequence minimum distances") {
  SECTION("a single sequence") {
    CooccurrenceMatrix o = mdsrec::build_cooccurrence({{1, 2, 3}}, 4);
    REQUIRE(o.matrix.get(1, 2) == 1.0);
    REQUIRE(o.matrix.get(2, 3) == 1.0);
    REQUIRE(o.matrix.get(1, 3) == 0.5);
    REQUIRE(o.matrix.get(0, 1) == 0.0);
    REQUIRE(o.matrix.get(1, 1) == 0.0);  // zero diagonal
    REQUIRE(o.built_from == 1);
  }
  SECTION("sequences add") {
    CooccurrenceMatrix o = mdsrec::build_cooccurrence({{1, 2}, {1, 2}}, 3);
    REQUIRE(o.matrix.get(1, 2) == 2.0);
  }
  SECTION("disjoint catalogs stay block separated") {
    CooccurrenceMatrix o = mdsrec::build_cooccurrence({{0, 1}, {2, 3}}, 4);
    REQUIRE(o.matrix.get(0, 1) == 1.0);
    REQUIRE(o.matrix.get(2, 3) == 1.0);
    for (int i : {0, 1})
      for (int j : {2, 3}) REQUIRE(o.matrix.get(i, j) == 0.0);
  }
  SECTION("result is symmetric") {
    Rng rng(31);
    std::vector<std::vector<int>> seqs;
    for (int s = 0; s < 10; ++s) {
      std::vector<int> seq;
      for (int j = 0; j < 8; ++j) seq.push_back(static_cast<int>(rng.uniform_int(6)));
      seqs.push_back(std::move(seq));
    }
    CooccurrenceMatrix o = mdsrec::build_cooccurrence(seqs, 6);
    REQUIRE(o.matrix.is_symmetric());
  }
  SECTION("items outside the catalog are rejected") {
    REQUIRE_THROWS(mdsrec::build_cooccurrence({{0, 5}}, 4));
  }
}

TEST_CASE("co-occurrence matches the brute-force oracle on random sequences") {
  Rng rng(37);
  for (bool unit : {false, true}) {
    std::vector<std::vector<int>> seqs;
    for (int s = 0; s < 50; ++s) {
      const int len = 3 + static_cast<int>(rng.uniform_int(10));
      std::vector<int> seq;
      for (int j = 0; j < len; ++j) seq.push_back(static_cast<int>(rng.uniform_int(15)));
      seqs.push_back(std::move(seq));
    }
    CooccurrenceMatrix o = mdsrec::build_cooccurrence(seqs, 15, unit);
    const Tensor want = oracles::brute_force_cooccur(seqs, 15, unit);
    REQUIRE(oracles::bit_equal(o.matrix.to_dense(), want));
  }
}

TEST_CASE("later sequences never reduce an affinity") {
  std::vector<std::vector<int>> seqs{{0, 1, 2}};
  CooccurrenceMatrix before = mdsrec::build_cooccurrence(seqs, 3);
  seqs.push_back({2, 0});
  CooccurrenceMatrix after = mdsrec::build_cooccurrence(seqs, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) REQUIRE(after.matrix.get(i, j) >= before.matrix.get(i, j));
}

TEST_CASE("floor pruning and row normalization") {
  SECTION("entries below the floor are dropped") {
    CooccurrenceMatrix o = mdsrec::build_cooccurrence({{1, 2, 3}}, 4, false, 0.75);
    REQUIRE(o.matrix.get(1, 2) == 1.0);
    REQUIRE(o.matrix.get(1, 3) == 0.0);  // 0.5 < floor
  }
  SECTION("row normalization makes rows sum to one") {
    CooccurrenceMatrix o = mdsrec::build_cooccurrence({{1, 2, 3}}, 4, false, 0.0, true);
    for (int i = 1; i <= 3; ++i) {
      double s = 0.0;
      for (int j = 0; j < 4; ++j) s += o.matrix.get(i, j);
      REQUIRE(s == Catch::Approx(1.0).epsilon(1e-12));
    }
    REQUIRE(o.matrix.get(1, 2) == Catch::Approx(1.0 / 1.5));
  }
}

TEST_CASE("behavior injection") {
  SECTION("mu = 0 is the identity") {
    Rng rng(41);
    Tensor e = Tensor::randn({4, 3}, rng);
    CooccurrenceMatrix o = mdsrec::build_cooccurrence({{0, 1, 2, 3}}, 4);
    Tensor out = mdsrec::inject_behavior(e, o.matrix, 0.0);
    REQUIRE(oracles::bit_equal(out, e));
  }
  SECTION("an empty relation matrix is the identity") {
    Rng rng(43);
    Tensor e = Tensor::randn({3, 2}, rng);
    SparseMatrix zero = SparseMatrix::from_triplets(3, 3, {});
    Tensor out = mdsrec::inject_behavior(e, zero, 5.0);
    REQUIRE(oracles::bit_equal(out, e));
  }
  SECTION("a two-item toy matches the closed form") {
    // O = [[0,1],[1,0]], E = [[1,0],[0,1]], mu = 1: out = O*E + E = all ones
    Tensor e = Tensor::eye(2);
    CooccurrenceMatrix o = mdsrec::build_cooccurrence({{0, 1}}, 2);
    Tensor out = mdsrec::inject_behavior(e, o.matrix, 1.0);
    for (std::int64_t i = 0; i < out.size(); ++i) REQUIRE(out[i] == 1.0);
  }
  SECTION("shape and sign guards") {
    Tensor e = Tensor::eye(3);
    SparseMatrix o2 = SparseMatrix::from_triplets(2, 2, {});
    REQUIRE_THROWS(mdsrec::inject_behavior(e, o2, 1.0));
    SparseMatrix o3 = SparseMatrix::from_triplets(3, 3, {});
    REQUIRE_THROWS(mdsrec::inject_behavior(e, o3, -1.0));
  }
}

TEST_CASE("co-occurrence dump lists the upper triangle") {
  CooccurrenceMatrix o = mdsrec::build_cooccurrence({{1, 2, 3}}, 4);
  const std::string path = "test_cooccur_dump.tsv";
  mdsrec::dump_cooccurrence(path, o);
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  in.close();
  std::remove(path.c_str());
  REQUIRE(lines == std::vector<std::string>{"1\t2\t1", "1\t3\t0.5", "2\t3\t1"});
}
