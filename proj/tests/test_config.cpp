#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>

#include "mdsrec/config.hpp"

using mdsrec::DataError;
using mdsrec::ModelConfig;
using mdsrec::UsageError;

TEST_CASE("defaults validate") {
  ModelConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  REQUIRE(cfg.d == 64);
  REQUIRE(cfg.ffn_width() == 64);  // d_ff = 0 falls back to d
  REQUIRE(cfg.head_dim() == 32);
  REQUIRE(cfg.patience == 10);
  REQUIRE(cfg.activation == "gelu");
}

TEST_CASE("resolved text round-trips through set") {
  ModelConfig cfg;
  cfg.d = 48;
  cfg.d_ff = 96;
  cfg.heads = 3;
  cfg.mu_modal = 0.3;
  cfg.rho_visual = 0.25;
  cfg.rho_textual = 0.75;
  cfg.lr = 5e-4;
  cfg.seed = 1234567890123ull;
  cfg.activation = "relu";
  cfg.ablate_mrgc = true;
  cfg.cooccur_floor = 0.125;
  cfg.prefix_augment = true;

  ModelConfig back;
  for (const auto& [k, v] : mdsrec::parse_kv_text(cfg.resolved(), "mem")) back.set(k, v);
  REQUIRE(back.resolved() == cfg.resolved());
  REQUIRE(back.seed == cfg.seed);
  REQUIRE(back.mu_modal == cfg.mu_modal);
  REQUIRE(back.ablate_mrgc);
  REQUIRE(back.prefix_augment);
}

TEST_CASE("validate rejects bad settings") {
  auto expect_usage = [](void (*mutate)(ModelConfig&)) {
    ModelConfig cfg;
    mutate(cfg);
    REQUIRE_THROWS_AS(cfg.validate(), UsageError);
  };
  expect_usage([](ModelConfig& c) { c.d = 0; });
  expect_usage([](ModelConfig& c) { c.heads = 3; });  // 64 % 3 != 0
  expect_usage([](ModelConfig& c) { c.d_ff = -1; });
  expect_usage([](ModelConfig& c) { c.max_len = 0; });
  expect_usage([](ModelConfig& c) { c.layers = -1; });
  expect_usage([](ModelConfig& c) { c.h = -1; });
  expect_usage([](ModelConfig& c) { c.k = 0; });
  expect_usage([](ModelConfig& c) { c.mu_id = -0.5; });
  expect_usage([](ModelConfig& c) { c.rho_visual = 0.6; });  // sum 1.1
  expect_usage([](ModelConfig& c) { c.tau = 0.0; });
  expect_usage([](ModelConfig& c) { c.lr = 0.0; });
  expect_usage([](ModelConfig& c) { c.batch_size = 0; });
  expect_usage([](ModelConfig& c) { c.max_epochs = -1; });
  expect_usage([](ModelConfig& c) { c.patience = 0; });
  expect_usage([](ModelConfig& c) { c.activation = "tanh"; });
}

TEST_CASE("set rejects unknown keys and malformed values") {
  ModelConfig cfg;
  REQUIRE_THROWS_AS(cfg.set("dd", "64"), UsageError);
  REQUIRE_THROWS_AS(cfg.set("d", "sixty"), UsageError);
  REQUIRE_THROWS_AS(cfg.set("lr", "fast"), UsageError);
  REQUIRE_THROWS_AS(cfg.set("lr", "0.1x"), UsageError);
  REQUIRE_THROWS_AS(cfg.set("ablate_dis", "maybe"), UsageError);
  REQUIRE_THROWS_AS(cfg.set("seed", "abc"), UsageError);
  REQUIRE_NOTHROW(cfg.set("ablate_dis", "1"));
  REQUIRE(cfg.ablate_dis);
  REQUIRE_NOTHROW(cfg.set("ablate_dis", "false"));
  REQUIRE_FALSE(cfg.ablate_dis);
}

TEST_CASE("fmt_double emits the shortest exact decimal") {
  REQUIRE(mdsrec::fmt_double(0.5) == "0.5");
  REQUIRE(mdsrec::fmt_double(16.0) == "16");
  REQUIRE(mdsrec::fmt_double(0.001) == "0.001");
  const double vals[] = {0.1, 1.0 / 3.0, 5e-4, 1e300, -2.718281828459045};
  for (double v : vals) {
    const std::string s = mdsrec::fmt_double(v);
    REQUIRE(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("key-value text parsing") {
  SECTION("comments, blanks, and spacing") {
    const std::string text = "# header\n\n d = 32 \nlr=0.01# trailing\n\tactivation = relu\n";
    const auto kv = mdsrec::parse_kv_text(text, "mem");
    REQUIRE(kv.size() == 3);
    REQUIRE(kv[0] == std::pair<std::string, std::string>{"d", "32"});
    REQUIRE(kv[1] == std::pair<std::string, std::string>{"lr", "0.01"});
    REQUIRE(kv[2] == std::pair<std::string, std::string>{"activation", "relu"});
  }
  SECTION("missing equals reports the line number") {
    REQUIRE_THROWS_WITH(mdsrec::parse_kv_text("d = 2\nnot a pair\n", "cfg"),
                        Catch::Matchers::ContainsSubstring("cfg:2"));
  }
  SECTION("empty key is an error") {
    REQUIRE_THROWS_AS(mdsrec::parse_kv_text(" = 5\n", "cfg"), DataError);
  }
}

TEST_CASE("config file loading") {
  const std::string path = "test_config_tmp.cfg";
  {
    std::ofstream out(path);
    out << "# overrides\nd = 16\nheads = 4\nmu_id = 2.5\nablate_ica = true\n";
  }
  ModelConfig cfg;
  cfg.load_file(path);
  std::remove(path.c_str());
  REQUIRE(cfg.d == 16);
  REQUIRE(cfg.heads == 4);
  REQUIRE(cfg.mu_id == 2.5);
  REQUIRE(cfg.ablate_ica);
  REQUIRE_NOTHROW(cfg.validate());

  REQUIRE_THROWS_AS(cfg.load_file("no_such_file.cfg"), DataError);
}
