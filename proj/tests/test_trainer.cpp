#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "mdsrec/trainer.hpp"
#include "support/oracles.hpp"

using mdsrec::AdamState;
using mdsrec::Checkpoint;
using mdsrec::EpochRecord;
using mdsrec::FitResult;
using mdsrec::ModelConfig;
using mdsrec::Rng;
using mdsrec::Tensor;
namespace ad = mdsrec::ad;

TEST_CASE("adam steps") {
  ad::Parameter theta("theta", Tensor::zeros({1}));
  std::vector<ad::Parameter*> params{&theta};
  AdamState st = mdsrec::init_adam(params);

  SECTION("the first update moves by almost exactly the learning rate") {
    theta.grad[0] = 2.0;
    mdsrec::adam_step(params, st, 0.05);
    REQUIRE(st.step == 1);
    REQUIRE(std::fabs(theta.value[0] + 0.05) < 1e-8);
    REQUIRE(theta.grad[0] == 0.0);
  }
  SECTION("zero gradients leave the value in place but advance the step") {
    mdsrec::adam_step(params, st, 0.05);
    REQUIRE(theta.value[0] == 0.0);
    REQUIRE(st.step == 1);
  }
  SECTION("a quadratic bowl is minimized") {
    theta.value[0] = 10.0;
    for (int it = 0; it < 500; ++it) {
      theta.grad[0] = 2.0 * (theta.value[0] - 3.0);
      mdsrec::adam_step(params, st, 0.1);
    }
    REQUIRE(std::fabs(theta.value[0] - 3.0) < 1e-3);
  }
  SECTION("non-finite gradients are refused by name") {
    theta.grad[0] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_MATCHES(
        mdsrec::adam_step(params, st, 0.1), mdsrec::NumericError,
        Catch::Matchers::MessageMatches(
            Catch::Matchers::ContainsSubstring("non-finite gradient in tensor 'theta'")));
  }
  SECTION("state and parameter lists must stay aligned") {
    ad::Parameter extra("extra", Tensor::zeros({1}));
    std::vector<ad::Parameter*> two{&theta, &extra};
    REQUIRE_THROWS_WITH(mdsrec::adam_step(two, st, 0.1),
                        Catch::Matchers::ContainsSubstring("state built for 1 tensors, got 2"));
  }
}

TEST_CASE("parameters snap to the 32-bit float grid") {
  ModelConfig cfg;
  cfg.d = 8;
  cfg.max_len = 6;
  Rng rng(77);
  mdsrec::ModelParams params = mdsrec::init_model_params(cfg, 9, 4, 4, rng);
  for (auto* p : params.all())
    for (std::int64_t j = 0; j < p->value.size(); ++j) p->value[j] += 1.0 / 3.0;
  mdsrec::round_params_f32(params);
  for (auto* p : params.all())
    for (std::int64_t j = 0; j < p->value.size(); ++j)
      REQUIRE(p->value[j] == static_cast<double>(static_cast<float>(p->value[j])));
}

TEST_CASE("history files are byte stable") {
  const std::string path = "/tmp/mdsrec_history.csv";
  std::vector<EpochRecord> hist{{1, 0.5, 0.25, 0.125}, {2, 0.375, 0.5, 0.4375}};
  mdsrec::write_history(path, hist);
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  std::remove(path.c_str());
  REQUIRE(lines == std::vector<std::string>{"epoch,train_loss,valid_recall10,valid_ndcg10",
                                            "1,0.5,0.25,0.125", "2,0.375,0.5,0.4375"});
}

namespace {

struct TrainFixture {
  ModelConfig cfg;
  mdsrec::SynthResult synth;

  explicit TrainFixture(int max_epochs = 3) {
    cfg.d = 8;
    cfg.max_len = 8;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.h = 2;
    cfg.k = 3;
    cfg.batch_size = 4;
    cfg.max_epochs = max_epochs;
    cfg.seed = 512;
    cfg.validate();
    mdsrec::SynthSpec spec;
    spec.n_users = 8;
    spec.n_items = 12;
    spec.k_true = 2;
    spec.d_visual = 4;
    spec.d_textual = 4;
    spec.len_min = 5;
    spec.len_max = 7;
    synth = mdsrec::synth_generate(spec, 31);
  }

  FitResult run() { return mdsrec::fit(cfg, synth.dataset, synth.visual, synth.textual); }
};

}  // namespace

TEST_CASE("the training loop trains, records, and restores") {
  TrainFixture f;
  FitResult r = f.run();

  REQUIRE(r.epochs_run == 3);
  REQUIRE(r.history.size() == 3);
  REQUIRE_FALSE(r.diverged);
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    REQUIRE(r.history[i].epoch == static_cast<int>(i) + 1);
    REQUIRE(std::isfinite(r.history[i].train_loss));
    REQUIRE(r.history[i].train_loss > 0.0);
  }
  REQUIRE(r.best_epoch >= 1);
  REQUIRE(r.best_recall10 >= 0.0);

  SECTION("the returned parameters are the best-epoch snapshot") {
    const mdsrec::SplitDataset split = mdsrec::split_leave_one_out(f.synth.dataset);
    auto valid = mdsrec::build_eval_examples(split, mdsrec::EvalSplit::valid);
    mdsrec::RankingReport rep =
        mdsrec::evaluate_model(r.config, r.params, r.cache, f.synth.visual, f.synth.textual,
                               valid, f.synth.dataset.pad_index());
    REQUIRE(rep.recall_at(10) == r.best_recall10);
  }
  SECTION("training twice from the same seed is bitwise identical") {
    FitResult r2 = f.run();
    REQUIRE(oracles::bit_equal(r.params.e_id.value, r2.params.e_id.value));
    REQUIRE(r.history.size() == r2.history.size());
    for (std::size_t i = 0; i < r.history.size(); ++i) {
      REQUIRE(r.history[i].train_loss == r2.history[i].train_loss);
      REQUIRE(r.history[i].valid_recall10 == r2.history[i].valid_recall10);
    }
  }
  SECTION("every trained value sits on the f32 grid") {
    for (auto* p : r.params.all())
      for (std::int64_t j = 0; j < p->value.size(); ++j)
        REQUIRE(p->value[j] == static_cast<double>(static_cast<float>(p->value[j])));
  }
}

TEST_CASE("training loop edge behavior") {
  SECTION("zero epochs means no history and untouched flags") {
    TrainFixture f(0);
    FitResult r = f.run();
    REQUIRE(r.history.empty());
    REQUIRE(r.epochs_run == 0);
    REQUIRE_FALSE(r.stopped_early);
    REQUIRE_FALSE(r.diverged);
    REQUIRE(r.best_epoch == 0);
  }
  SECTION("a frozen model stops after exactly the patience budget") {
    TrainFixture f(50);
    f.cfg.lr = 1e-30;
    f.cfg.patience = 10;
    FitResult r = f.run();
    REQUIRE(r.stopped_early);
    REQUIRE(r.best_epoch == 1);
    REQUIRE(r.epochs_run == 11);
    REQUIRE(r.history.size() == 11);
    REQUIRE_FALSE(r.diverged);
  }
  SECTION("an absurd learning rate is caught as divergence") {
    TrainFixture f(5);
    f.cfg.lr = 1e154;
    FitResult r = f.run();
    REQUIRE(r.diverged);
    REQUIRE_FALSE(r.divergence_note.empty());
    REQUIRE(r.divergence_note.find("at epoch") != std::string::npos);
    REQUIRE(r.epochs_run < 5);
  }
}

TEST_CASE("checkpoints round-trip the model") {
  TrainFixture f(2);
  FitResult r = f.run();
  const std::string path = "/tmp/mdsrec_test_ckpt.bin";
  mdsrec::save_checkpoint(path, r.config, r.params);
  Checkpoint ck = mdsrec::load_checkpoint(path);
  std::remove(path.c_str());

  REQUIRE(ck.config.resolved() == r.config.resolved());
  REQUIRE(ck.tensors.size() == r.params.all().size());
  REQUIRE(ck.find("e_id") != nullptr);
  REQUIRE(ck.find("nonsense") == nullptr);

  mdsrec::ModelParams restored = mdsrec::params_from_checkpoint(ck);
  auto orig = r.params.all();
  auto back = restored.all();
  REQUIRE(orig.size() == back.size());
  for (std::size_t i = 0; i < orig.size(); ++i) {
    REQUIRE(orig[i]->name == back[i]->name);
    REQUIRE(oracles::bit_equal(orig[i]->value, back[i]->value));
  }

  SECTION("the restored model evaluates identically") {
    const mdsrec::SplitDataset split = mdsrec::split_leave_one_out(f.synth.dataset);
    auto valid = mdsrec::build_eval_examples(split, mdsrec::EvalSplit::valid);
    mdsrec::RankingReport a =
        mdsrec::evaluate_model(r.config, r.params, r.cache, f.synth.visual, f.synth.textual,
                               valid, f.synth.dataset.pad_index());
    mdsrec::RankingReport b =
        mdsrec::evaluate_model(ck.config, restored, r.cache, f.synth.visual, f.synth.textual,
                               valid, f.synth.dataset.pad_index());
    REQUIRE(a.ranks == b.ranks);
  }
}

TEST_CASE("checkpoints with modal projections round-trip") {
  TrainFixture f(1);
  f.cfg.ablate_mrgc = true;
  FitResult r = f.run();
  const std::string path = "/tmp/mdsrec_test_ckpt_mrgc.bin";
  mdsrec::save_checkpoint(path, r.config, r.params);
  Checkpoint ck = mdsrec::load_checkpoint(path);
  std::remove(path.c_str());
  mdsrec::ModelParams restored = mdsrec::params_from_checkpoint(ck);
  REQUIRE(restored.has_proj);
  REQUIRE(oracles::bit_equal(restored.proj_visual.value, r.params.proj_visual.value));
}

namespace {

void write_bytes(std::ofstream& out, const char* data, std::streamsize n) { out.write(data, n); }

std::string craft_path() { return "/tmp/mdsrec_bad_ckpt.bin"; }

}  // namespace

TEST_CASE("malformed checkpoints fail loudly") {
  const std::string path = craft_path();
  auto expect_load_error = [&](const std::string& needle) {
    REQUIRE_THROWS_MATCHES(mdsrec::load_checkpoint(path), mdsrec::DataError,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring(needle)));
    std::remove(path.c_str());
  };
  const std::string echo = ModelConfig{}.resolved();
  auto begin_valid_header = [&](std::ofstream& out) {
    write_bytes(out, "MDSC", 4);
    mdsrec::detail::write_u32(out, 1);
    mdsrec::detail::write_u32(out, static_cast<std::uint32_t>(echo.size()));
    write_bytes(out, echo.data(), static_cast<std::streamsize>(echo.size()));
  };

  SECTION("missing file") {
    REQUIRE_THROWS_MATCHES(mdsrec::load_checkpoint("/tmp/mdsrec_no_such_ckpt.bin"),
                           mdsrec::DataError,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("cannot open checkpoint")));
  }
  SECTION("bad magic") {
    std::ofstream out(path, std::ios::binary);
    write_bytes(out, "MDSX", 4);
    mdsrec::detail::write_u32(out, 1);
    out.close();
    expect_load_error("not a checkpoint file (bad magic)");
  }
  SECTION("unsupported version") {
    std::ofstream out(path, std::ios::binary);
    write_bytes(out, "MDSC", 4);
    mdsrec::detail::write_u32(out, 2);
    out.close();
    expect_load_error("unsupported checkpoint version 2");
  }
  SECTION("truncated config block") {
    std::ofstream out(path, std::ios::binary);
    write_bytes(out, "MDSC", 4);
    mdsrec::detail::write_u32(out, 1);
    mdsrec::detail::write_u32(out, 100);
    write_bytes(out, "abc", 3);
    out.close();
    expect_load_error("truncated config block");
  }
  SECTION("truncated tensor name") {
    std::ofstream out(path, std::ios::binary);
    begin_valid_header(out);
    mdsrec::detail::write_u32(out, 1);
    mdsrec::detail::write_u32(out, 10);
    write_bytes(out, "abc", 3);
    out.close();
    expect_load_error("truncated tensor name");
  }
  SECTION("duplicate tensor") {
    std::ofstream out(path, std::ios::binary);
    begin_valid_header(out);
    mdsrec::detail::write_u32(out, 2);
    for (int rep = 0; rep < 2; ++rep) {
      mdsrec::detail::write_u32(out, 1);
      write_bytes(out, "x", 1);
      mdsrec::detail::write_u32(out, 1);
      mdsrec::detail::write_u32(out, 1);
      mdsrec::detail::write_f32(out, 0.5f);
    }
    out.close();
    expect_load_error("duplicate tensor 'x'");
  }
  SECTION("bad tensor rank") {
    std::ofstream out(path, std::ios::binary);
    begin_valid_header(out);
    mdsrec::detail::write_u32(out, 1);
    mdsrec::detail::write_u32(out, 1);
    write_bytes(out, "x", 1);
    mdsrec::detail::write_u32(out, 0);
    out.close();
    expect_load_error("bad tensor rank 0");
  }
}

TEST_CASE("parameter reconstruction validates the tensor inventory") {
  TrainFixture f(1);
  FitResult r = f.run();
  const std::string path = "/tmp/mdsrec_test_ckpt_inv.bin";
  mdsrec::save_checkpoint(path, r.config, r.params);
  Checkpoint ck = mdsrec::load_checkpoint(path);
  std::remove(path.c_str());

  SECTION("a missing tensor is named") {
    Checkpoint broken = ck;
    for (auto it = broken.tensors.begin(); it != broken.tensors.end(); ++it)
      if (it->first == "pos") {
        broken.tensors.erase(it);
        break;
      }
    REQUIRE_THROWS_MATCHES(mdsrec::params_from_checkpoint(broken), mdsrec::DataError,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("missing tensor 'pos'")));
  }
  SECTION("an extra tensor breaks the count") {
    Checkpoint broken = ck;
    broken.tensors.emplace_back("stray", Tensor::zeros({1}));
    REQUIRE_THROWS_MATCHES(
        mdsrec::params_from_checkpoint(broken), mdsrec::DataError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("but the model uses")));
  }
  SECTION("a reshaped tensor is rejected") {
    Checkpoint broken = ck;
    for (auto& [name, ten] : broken.tensors)
      if (name == "pos") ten = Tensor::zeros({2, 2});
    REQUIRE_THROWS_MATCHES(
        mdsrec::params_from_checkpoint(broken), mdsrec::DataError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("has shape")));
  }
  SECTION("a checkpoint without e_id is rejected") {
    Checkpoint broken = ck;
    broken.tensors.clear();
    REQUIRE_THROWS_MATCHES(
        mdsrec::params_from_checkpoint(broken), mdsrec::DataError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("no e_id tensor")));
  }
}
