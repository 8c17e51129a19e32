#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "mdsrec/cli.hpp"

// Exit codes: 0 ok, 1 internal, 2 usage, 3 data, 4 numeric.

namespace {

void add_set_flag(CLI::App* cmd, std::vector<std::string>& sets) {
  cmd->add_option("--set", sets, "config override key=value (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mdsrec: multimodal difference-aware sequential recommender"};
  app.set_version_flag("--version", std::string(mdsrec::kVersion));
  app.require_subcommand(1);

  mdsrec::cli::PrepareOpts prepare;
  CLI::App* p = app.add_subcommand("prepare", "build a data directory from logs or a synth spec");
  p->add_option("--interactions", prepare.interactions, "user<TAB>item<TAB>timestamp log");
  p->add_option("--features-visual", prepare.features_visual, "visual feature table");
  p->add_option("--features-textual", prepare.features_textual, "textual feature table");
  p->add_option("--synth", prepare.synth_spec, "synthetic data spec (key = value text)");
  p->add_option("--seed", prepare.seed, "synthetic generator seed");
  p->add_option("--out", prepare.out, "output directory")->required();
  p->add_option("--config", prepare.config_path, "config file for graph dumps");
  add_set_flag(p, prepare.sets);

  mdsrec::cli::TrainOpts train;
  CLI::App* t = app.add_subcommand("train", "fit a model on a prepared data directory");
  t->add_option("--data", train.data, "prepared data directory")->required();
  t->add_option("--config", train.config_path, "config file (key = value text)");
  t->add_option("--out", train.out, "output directory")->required();
  add_set_flag(t, train.sets);

  mdsrec::cli::EvaluateOpts evaluate;
  CLI::App* e = app.add_subcommand("evaluate", "rank held-out targets with a checkpoint");
  e->add_option("--checkpoint", evaluate.checkpoint, "checkpoint file")->required();
  e->add_option("--data", evaluate.data, "prepared data directory")->required();
  e->add_option("--out", evaluate.out, "report CSV path");
  e->add_option("--split", evaluate.split, "test or valid (default test)");

  mdsrec::cli::GradcheckOpts gradcheck;
  CLI::App* g = app.add_subcommand("gradcheck", "finite-difference audit of every gradient");
  g->add_option("--config", gradcheck.config_path, "config file overriding the tiny default");
  g->add_option("--tol", gradcheck.tol, "max allowed relative error");
  g->add_option("--step", gradcheck.step, "finite-difference step");
  g->add_option("--stride", gradcheck.stride, "check every n-th entry");
  add_set_flag(g, gradcheck.sets);

  mdsrec::cli::AblateOpts ablate;
  CLI::App* a = app.add_subcommand("ablate", "train one pipeline variant and log its metrics");
  a->add_option("--data", ablate.data, "prepared data directory")->required();
  a->add_option("--variant", ablate.variant, "full, dis, cre, mrgc or ica")->required();
  a->add_option("--config", ablate.config_path, "config file");
  a->add_option("--out", ablate.out, "comparison CSV to append to");
  add_set_flag(a, ablate.sets);

  mdsrec::cli::SweepOpts sweep;
  CLI::App* s = app.add_subcommand("sweep", "retrain across a grid of H or k");
  s->add_option("--data", sweep.data, "prepared data directory")->required();
  s->add_option("--param", sweep.param, "H or k")->required();
  s->add_option("--grid", sweep.grid, "comma-separated values")->required();
  s->add_option("--config", sweep.config_path, "config file");
  s->add_option("--out", sweep.out, "CSV output path");
  add_set_flag(s, sweep.sets);

  CLI::App* schema = app.add_subcommand("schema", "print the default config with every key");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (p->parsed()) return mdsrec::cli::cmd_prepare(prepare);
    if (t->parsed()) return mdsrec::cli::cmd_train(train);
    if (e->parsed()) return mdsrec::cli::cmd_evaluate(evaluate);
    if (g->parsed()) return mdsrec::cli::cmd_gradcheck(gradcheck);
    if (a->parsed()) return mdsrec::cli::cmd_ablate(ablate);
    if (s->parsed()) return mdsrec::cli::cmd_sweep(sweep);
    if (schema->parsed()) {
      mdsrec::ModelConfig cfg;
      std::printf("# mdsrec config schema: key = value per line, '#' comments\n%s",
                  cfg.resolved().c_str());
      return 0;
    }
  } catch (const mdsrec::UsageError& err) {
    std::fprintf(stderr, "usage error: %s\n", err.what());
    return 2;
  } catch (const mdsrec::DataError& err) {
    std::fprintf(stderr, "data error: %s\n", err.what());
    return 3;
  } catch (const mdsrec::NumericError& err) {
    std::fprintf(stderr, "numeric error: %s\n", err.what());
    return 4;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 2;
}
