#pragma once

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mdsrec/common.hpp"
#include "mdsrec/config.hpp"
#include "mdsrec/cooccur.hpp"
#include "mdsrec/data.hpp"
#include "mdsrec/eval.hpp"
#include "mdsrec/gradcheck.hpp"
#include "mdsrec/interest.hpp"
#include "mdsrec/model.hpp"
#include "mdsrec/relgraph.hpp"
#include "mdsrec/trainer.hpp"

// Command implementations behind the mdsrec binary: prepare, train,
// evaluate, gradcheck, ablate, sweep. Kept header-side so tests can drive
// the exact code paths the executable runs.

namespace mdsrec::cli {

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline std::uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) fail_as<DataError>("cannot read ", path, " for digest");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes);
}

inline std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// `key=value` overrides from the command line; these win over config files.
inline void apply_overrides(ModelConfig& cfg, const std::vector<std::string>& sets) {
  for (const std::string& s : sets) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      fail_as<UsageError>("--set expects key=value, got '", s, "'");
    auto trim = [](std::string t) {
      const auto b = t.find_first_not_of(" \t");
      const auto e = t.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : t.substr(b, e - b + 1);
    };
    cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
}

inline ModelConfig load_config(const std::string& config_path,
                               const std::vector<std::string>& sets) {
  ModelConfig cfg;
  if (!config_path.empty()) cfg.load_file(config_path);
  apply_overrides(cfg, sets);
  cfg.validate();
  return cfg;
}

struct DataBundle {
  InteractionDataset dataset;
  ModalFeatureTable visual, textual;
};

inline DataBundle load_data_dir(const std::string& dir) {
  DataBundle b;
  b.dataset = load_interactions(join_path(dir, "interactions.tsv"));
  b.visual = load_modal_features(join_path(dir, "features_visual.bin"), "visual", b.dataset);
  b.textual = load_modal_features(join_path(dir, "features_textual.bin"), "textual", b.dataset);
  return b;
}

// Reorders feature rows from one item-token indexing to another. The saved
// interaction file is the source of truth for dense ids, so features are
// realigned to the order a fresh load of that file produces.
inline Tensor align_feature_rows(const Tensor& src_rows,
                                 const std::vector<std::string>& src_tokens,
                                 const std::vector<std::string>& dst_tokens) {
  require(src_rows.dim(0) == static_cast<int>(src_tokens.size()),
          "feature table and token list disagree");
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < src_tokens.size(); ++i)
    index.emplace(src_tokens[i], static_cast<int>(i));
  Tensor out({static_cast<int>(dst_tokens.size()), src_rows.dim(1)});
  for (std::size_t j = 0; j < dst_tokens.size(); ++j) {
    auto it = index.find(dst_tokens[j]);
    if (it == index.end())
      fail_as<DataError>("item '", dst_tokens[j], "' has no feature row to align");
    for (int c = 0; c < src_rows.dim(1); ++c)
      out(static_cast<int>(j), c) = src_rows(it->second, c);
  }
  return out;
}

inline ModalFeatureTable make_table(const std::string& modality, Tensor rows) {
  ModalFeatureTable t;
  t.modality = modality;
  t.d_m = rows.dim(1);
  t.zero_rows = 0;
  for (int i = 0; i < rows.dim(0); ++i) {
    bool all_zero = true;
    for (int c = 0; c < rows.dim(1) && all_zero; ++c)
      if (rows(i, c) != 0.0) all_zero = false;
    if (all_zero) ++t.zero_rows;
  }
  t.rows = std::move(rows);
  return t;
}

struct PrepareOpts {
  std::string interactions, features_visual, features_textual;
  std::string synth_spec;
  std::string out;
  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = 42;
};

inline int cmd_prepare(const PrepareOpts& opts) {
  if (opts.out.empty()) fail_as<UsageError>("prepare: --out is required");
  const bool synth_mode = !opts.synth_spec.empty();
  const bool real_mode =
      !opts.interactions.empty() || !opts.features_visual.empty() || !opts.features_textual.empty();
  if (synth_mode && real_mode)
    fail_as<UsageError>("prepare: --synth and --interactions/--features-* are mutually exclusive");
  if (!synth_mode) {
    if (opts.interactions.empty()) fail_as<UsageError>("prepare: missing --interactions");
    if (opts.features_visual.empty()) fail_as<UsageError>("prepare: missing --features-visual");
    if (opts.features_textual.empty()) fail_as<UsageError>("prepare: missing --features-textual");
  }
  ModelConfig cfg = load_config(opts.config_path, opts.sets);
  std::filesystem::create_directories(opts.out);

  const std::string inter_path = join_path(opts.out, "interactions.tsv");
  Tensor visual_rows, textual_rows;
  std::vector<std::string> src_tokens;
  int dropped_users = 0;

  if (synth_mode) {
    const SynthSpec spec = SynthSpec::parse(read_text_file(opts.synth_spec), opts.synth_spec);
    const SynthResult synth = synth_generate(spec, opts.seed);
    save_interactions(inter_path, synth.dataset);
    visual_rows = synth.visual.rows;
    textual_rows = synth.textual.rows;
    src_tokens = synth.dataset.item_tokens;
  } else {
    const InteractionDataset raw = load_interactions(opts.interactions);
    const ModalFeatureTable vis = load_modal_features(opts.features_visual, "visual", raw);
    const ModalFeatureTable txt = load_modal_features(opts.features_textual, "textual", raw);
    save_interactions(inter_path, raw);
    visual_rows = vis.rows;
    textual_rows = txt.rows;
    src_tokens = raw.item_tokens;
    dropped_users = raw.dropped_users;
  }

  // Reload what was just written: its dense ids are the canonical indexing
  // every later command will see.
  const InteractionDataset ds = load_interactions(inter_path);
  const ModalFeatureTable visual =
      make_table("visual", align_feature_rows(visual_rows, src_tokens, ds.item_tokens));
  const ModalFeatureTable textual =
      make_table("textual", align_feature_rows(textual_rows, src_tokens, ds.item_tokens));
  save_modal_features_binary(join_path(opts.out, "features_visual.bin"), visual.rows);
  save_modal_features_binary(join_path(opts.out, "features_textual.bin"), textual.rows);

  const SplitDataset split = split_leave_one_out(ds);
  {
    std::ofstream sf(join_path(opts.out, "split.tsv"), std::ios::binary);
    require(sf.good(), "cannot write split.tsv");
    for (int u = 0; u < split.n_users(); ++u)
      sf << ds.user_tokens[static_cast<std::size_t>(u)] << '\t'
         << ds.item_tokens[static_cast<std::size_t>(split.valid_target[static_cast<std::size_t>(u)])]
         << '\t'
         << ds.item_tokens[static_cast<std::size_t>(split.test_target[static_cast<std::size_t>(u)])]
         << '\n';
  }

  const CooccurrenceMatrix cooccur = build_cooccurrence(
      split.train, ds.n_items, cfg.ablate_dis, cfg.cooccur_floor, cfg.cooccur_row_norm);
  dump_cooccurrence(join_path(opts.out, "cooccur.tsv"), cooccur);
  if (!cfg.ablate_mrgc) {
    const Tensor inj_v = cfg.ablate_cre
                             ? visual.rows
                             : inject_behavior(visual.rows, cooccur.matrix, cfg.mu_modal);
    const Tensor inj_t = cfg.ablate_cre
                             ? textual.rows
                             : inject_behavior(textual.rows, cooccur.matrix, cfg.mu_modal);
    dump_graph(join_path(opts.out, "graph_visual.tsv"),
               build_topH_graph(inj_v, cfg.h, "visual", cfg.graph_row_scale));
    dump_graph(join_path(opts.out, "graph_textual.tsv"),
               build_topH_graph(inj_t, cfg.h, "textual", cfg.graph_row_scale));
  }

  {
    std::ofstream rep(join_path(opts.out, "prepare_report.txt"), std::ios::binary);
    require(rep.good(), "cannot write prepare_report.txt");
    rep << "users = " << ds.n_users << "\n"
        << "items = " << ds.n_items << "\n"
        << "interactions = " << ds.n_interactions << "\n"
        << "avg_length = " << fmt_double(ds.avg_length()) << "\n"
        << "sparsity = " << fmt_double(ds.sparsity()) << "\n"
        << "dropped_users = " << dropped_users << "\n"
        << "zero_feature_rows_visual = " << visual.zero_rows << "\n"
        << "zero_feature_rows_textual = " << textual.zero_rows << "\n";
  }
  std::printf("prepared %d users, %d items, %lld interactions -> %s\n", ds.n_users, ds.n_items,
              static_cast<long long>(ds.n_interactions), opts.out.c_str());
  return 0;
}

struct TrainOpts {
  std::string data, config_path, out;
  std::vector<std::string> sets;
};

inline void write_manifest(const std::string& path, const ModelConfig& cfg,
                           const TrainOpts& opts) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write ", path);
  out << "tool = mdsrec/" << kVersion << "\n"
      << "command = train\n"
      << "data = " << opts.data << "\n"
      << "seed = " << cfg.seed << "\n"
      << "digest.interactions = " << hex64(file_digest(join_path(opts.data, "interactions.tsv")))
      << "\n"
      << "digest.features_visual = "
      << hex64(file_digest(join_path(opts.data, "features_visual.bin"))) << "\n"
      << "digest.features_textual = "
      << hex64(file_digest(join_path(opts.data, "features_textual.bin"))) << "\n"
      << "digest.config_file = "
      << (opts.config_path.empty() ? std::string("-") : hex64(file_digest(opts.config_path)))
      << "\n"
      << "artifact.checkpoint = " << join_path(opts.out, "checkpoint.mdsc") << "\n"
      << "artifact.history = " << join_path(opts.out, "history.csv") << "\n";
  std::istringstream lines(cfg.resolved());
  for (std::string line; std::getline(lines, line);)
    if (!line.empty()) out << "config." << line << "\n";
  require(out.good(), "write failed: ", path);
}

inline int cmd_train(const TrainOpts& opts) {
  if (opts.data.empty()) fail_as<UsageError>("train: --data is required");
  if (opts.out.empty()) fail_as<UsageError>("train: --out is required");
  ModelConfig cfg = load_config(opts.config_path, opts.sets);
  DataBundle bundle = load_data_dir(opts.data);
  std::filesystem::create_directories(opts.out);
  write_manifest(join_path(opts.out, "manifest.txt"), cfg, opts);

  FitResult result = fit(cfg, bundle.dataset, bundle.visual, bundle.textual);
  write_history(join_path(opts.out, "history.csv"), result.history);
  save_checkpoint(join_path(opts.out, "checkpoint.mdsc"), result.config, result.params);
  if (result.diverged)
    fail_as<NumericError>("training diverged (", result.divergence_note,
                          "); best checkpoint kept");

  std::printf("trained %d epoch(s); best valid Recall@10 %.4f at epoch %d%s\n",
              result.epochs_run, result.best_recall10, result.best_epoch,
              result.stopped_early ? " (early stop)" : "");
  const SplitDataset split = split_leave_one_out(bundle.dataset);
  const RankingReport test = evaluate_model(
      result.config, result.params, result.cache, bundle.visual, bundle.textual,
      build_eval_examples(split, EvalSplit::test), bundle.dataset.pad_index());
  std::printf("%s", summarize_report(test).c_str());
  return 0;
}

struct EvaluateOpts {
  std::string checkpoint, data, out;
  std::string split = "test";
};

inline int cmd_evaluate(const EvaluateOpts& opts) {
  if (opts.checkpoint.empty()) fail_as<UsageError>("evaluate: --checkpoint is required");
  if (opts.data.empty()) fail_as<UsageError>("evaluate: --data is required");
  if (opts.split != "test" && opts.split != "valid")
    fail_as<UsageError>("evaluate: --split must be test or valid, got '", opts.split, "'");

  const Checkpoint ck = load_checkpoint(opts.checkpoint);
  ModelParams params = params_from_checkpoint(ck);
  DataBundle bundle = load_data_dir(opts.data);
  if (params.n_items != bundle.dataset.n_items)
    fail_as<DataError>("checkpoint was trained on ", params.n_items, " items but ", opts.data,
                       " holds ", bundle.dataset.n_items);
  if (ck.config.ablate_mrgc) {
    if (params.proj_visual.value.dim(0) != bundle.visual.d_m ||
        params.proj_textual.value.dim(0) != bundle.textual.d_m)
      fail_as<DataError>("checkpoint projection widths do not match the feature tables");
  }

  const SplitDataset split = split_leave_one_out(bundle.dataset);
  const PipelineCache cache = build_pipeline(ck.config, split.train, bundle.dataset.n_items,
                                             bundle.visual, bundle.textual, ck.config.seed);
  const auto examples = build_eval_examples(
      split, opts.split == "test" ? EvalSplit::test : EvalSplit::valid);
  const RankingReport report = evaluate_model(ck.config, params, cache, bundle.visual,
                                              bundle.textual, examples,
                                              bundle.dataset.pad_index());
  if (!opts.out.empty()) write_eval_report(opts.out, report);
  std::printf("metric,cutoff,value\n");
  for (std::size_t i = 0; i < report.cutoffs.size(); ++i)
    std::printf("recall,%d,%s\n", report.cutoffs[i], fmt_double(report.recall[i]).c_str());
  for (std::size_t i = 0; i < report.cutoffs.size(); ++i)
    std::printf("ndcg,%d,%s\n", report.cutoffs[i], fmt_double(report.ndcg[i]).c_str());
  std::printf("%s", summarize_report(report).c_str());
  return 0;
}

struct GradcheckOpts {
  std::string config_path;
  std::vector<std::string> sets;
  double tol = 1e-4;
  double step = 1e-5;
  int stride = 1;
};

// A micro-model over a synthetic 3-user, 8-item log; small enough that every
// parameter entry is finite-difference checked in seconds.
inline ModelConfig gradcheck_default_config() {
  ModelConfig cfg;
  cfg.d = 8;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.k = 3;
  cfg.h = 2;
  cfg.max_len = 8;
  cfg.batch_size = 8;
  cfg.seed = 15;  // reaches a cleanly FD-resolvable point after one warmup burst
  return cfg;
}

inline int cmd_gradcheck(const GradcheckOpts& opts) {
  ModelConfig cfg = gradcheck_default_config();
  if (!opts.config_path.empty()) cfg.load_file(opts.config_path);
  apply_overrides(cfg, opts.sets);
  cfg.validate();
  if (opts.tol <= 0 || opts.step <= 0 || opts.stride < 1)
    fail_as<UsageError>("gradcheck: tol and step must be positive, stride >= 1");

  SynthSpec spec;
  spec.n_users = 3;
  spec.n_items = 8;
  spec.k_true = 2;
  spec.d_visual = 5;
  spec.d_textual = 4;
  spec.len_min = 5;
  spec.len_max = 7;
  spec.validate();
  const SynthResult synth = synth_generate(spec, cfg.seed);

  const SplitDataset split = split_leave_one_out(synth.dataset);
  const auto examples = build_train_examples(split, cfg.prefix_augment);
  const auto batches = make_batches(examples, cfg.batch_size, cfg.max_len,
                                    synth.dataset.pad_index(), nullptr);
  require(batches.size() == 1, "gradcheck: expected a single batch");
  const Batch& batch = batches[0];

  const PipelineCache cache =
      build_pipeline(cfg, split.train, synth.dataset.n_items, synth.visual, synth.textual,
                     cfg.seed);
  Rng init_rng = substream(cfg.seed, "init");
  ModelParams params =
      init_model_params(cfg, synth.dataset.n_items, spec.d_visual, spec.d_textual, init_rng);
  GumbelNoise noise;
  if (!cfg.ablate_ica) {
    Rng gumbel_rng = substream(cfg.seed, "gumbel");
    noise = make_gumbel_noise(batch, cfg.k, gumbel_rng);
  }
  const GumbelNoise* frozen = cfg.ablate_ica ? nullptr : &noise;

  auto forward = [&]() {
    ad::Tape tape;
    ForwardOutputs f =
        build_forward(tape, cfg, params, cache, synth.visual, synth.textual, batch, frozen);
    return tape.value(f.loss)[0];
  };
  auto fill_grads = [&]() {
    for (auto* p : params.all()) p->zero_grad();
    ad::Tape tape;
    ForwardOutputs f =
        build_forward(tape, cfg, params, cache, synth.visual, synth.textual, batch, frozen);
    tape.backward(f.loss);
  };

  // Difference quotients at a fixed step carry an absolute noise floor of
  // roughly eps * (intermediate magnitude) / (2 * step), so a gradient entry
  // sitting narrowly above that floor reports noise no matter how exact the
  // backward pass is. Which entries land in that band is point-specific,
  // while a wrong backward formula fails everywhere by orders of magnitude.
  // Check a few early points along the training trajectory (later ones
  // overfit and condition worse), restarting from a fresh init when a whole
  // trajectory is unlucky, and accept the first point where every entry of
  // every tensor agrees within tolerance.
  constexpr int kRestarts = 8, kBursts = 3, kBurstSteps = 20;
  ad::GradCheckReport report;
  int warm_steps = 0, restarts = 0;
  bool passed = false;
  for (int restart = 0; restart < kRestarts && !passed; ++restart) {
    if (restart > 0) {
      Rng re_init = substream(cfg.seed + restart, "init");
      params = init_model_params(cfg, synth.dataset.n_items, spec.d_visual, spec.d_textual,
                                 re_init);
      if (!cfg.ablate_ica) {
        Rng re_gumbel = substream(cfg.seed + restart, "gumbel");
        noise = make_gumbel_noise(batch, cfg.k, re_gumbel);
      }
      restarts = restart;
      warm_steps = 0;
    }
    const auto param_list = params.all();
    AdamState warm_state = init_adam(param_list);
    for (int burst = 0; burst < kBursts; ++burst) {
      report = ad::gradcheck(param_list, forward, fill_grads, opts.step, opts.stride);
      if (report.ok(opts.tol)) {
        passed = true;
        break;
      }
      if (burst + 1 == kBursts) break;
      for (int s = 0; s < kBurstSteps; ++s) {
        fill_grads();
        adam_step(param_list, warm_state, 1e-2);
        ++warm_steps;
      }
    }
  }
  if (warm_steps > 0 || restarts > 0)
    std::printf("conditioned check point: restart %d, %d warmup steps\n", restarts, warm_steps);

  for (const auto& t : report.tensors)
    std::printf("%-22s max_rel_err %.3e  (analytic %.6e numeric %.6e, %lld entries)\n",
                t.name.c_str(), t.max_rel_err, t.analytic, t.numeric,
                static_cast<long long>(t.n_checked));
  std::printf("worst relative error %.3e in tensor '%s' (tol %.1e)\n", report.max_rel_err,
              report.worst_param.c_str(), opts.tol);
  if (!report.ok(opts.tol))
    fail_as<NumericError>("gradient check failed: ", report.worst_param, " rel err ",
                          report.max_rel_err, " exceeds ", opts.tol);
  std::printf("gradcheck ok\n");
  return 0;
}

struct AblateOpts {
  std::string data, variant, config_path;
  std::vector<std::string> sets;
  std::string out = "ablation.csv";
};

inline ModelConfig apply_variant(ModelConfig cfg, const std::string& variant) {
  if (variant == "full") {
  } else if (variant == "dis") {
    cfg.ablate_dis = true;
  } else if (variant == "cre") {
    cfg.ablate_cre = true;
  } else if (variant == "mrgc") {
    cfg.ablate_mrgc = true;
  } else if (variant == "ica") {
    cfg.ablate_ica = true;
  } else {
    fail_as<UsageError>("unknown ablation variant '", variant,
                        "' (expected full, dis, cre, mrgc or ica)");
  }
  return cfg;
}

inline int cmd_ablate(const AblateOpts& opts) {
  if (opts.data.empty()) fail_as<UsageError>("ablate: --data is required");
  if (opts.variant.empty()) fail_as<UsageError>("ablate: --variant is required");
  ModelConfig cfg = apply_variant(load_config(opts.config_path, opts.sets), opts.variant);
  cfg.validate();
  DataBundle bundle = load_data_dir(opts.data);

  FitResult result = fit(cfg, bundle.dataset, bundle.visual, bundle.textual);
  if (result.diverged)
    fail_as<NumericError>("ablation '", opts.variant, "' diverged (", result.divergence_note,
                          ")");
  const SplitDataset split = split_leave_one_out(bundle.dataset);
  const RankingReport test = evaluate_model(
      result.config, result.params, result.cache, bundle.visual, bundle.textual,
      build_eval_examples(split, EvalSplit::test), bundle.dataset.pad_index());

  const bool fresh = !std::filesystem::exists(opts.out) ||
                     std::filesystem::file_size(opts.out) == 0;
  std::ofstream out(opts.out, std::ios::binary | std::ios::app);
  require(out.good(), "cannot open ", opts.out, " for append");
  if (fresh) out << "variant,recall10,ndcg10,recall20,ndcg20\n";
  out << opts.variant << "," << fmt_double(test.recall_at(10)) << ","
      << fmt_double(test.ndcg_at(10)) << "," << fmt_double(test.recall_at(20)) << ","
      << fmt_double(test.ndcg_at(20)) << "\n";
  require(out.good(), "write failed: ", opts.out);
  std::printf("%s: test Recall@10 %.4f NDCG@10 %.4f -> %s\n", opts.variant.c_str(),
              test.recall_at(10), test.ndcg_at(10), opts.out.c_str());
  return 0;
}

struct SweepOpts {
  std::string data, param, grid, config_path, out;
  std::vector<std::string> sets;
};

inline std::vector<int> parse_grid(const std::string& grid) {
  std::vector<int> values;
  std::string cur;
  auto flush = [&]() {
    if (cur.empty()) fail_as<UsageError>("sweep: empty value in --grid '", grid, "'");
    try {
      std::size_t used = 0;
      const int v = std::stoi(cur, &used);
      if (used != cur.size()) throw std::invalid_argument(cur);
      values.push_back(v);
    } catch (const std::exception&) {
      fail_as<UsageError>("sweep: bad grid value '", cur, "'");
    }
    cur.clear();
  };
  for (char c : grid) {
    if (c == ',')
      flush();
    else if (!std::isspace(static_cast<unsigned char>(c)))
      cur += c;
  }
  flush();
  return values;
}

inline int cmd_sweep(const SweepOpts& opts) {
  if (opts.data.empty()) fail_as<UsageError>("sweep: --data is required");
  if (opts.param != "H" && opts.param != "k")
    fail_as<UsageError>("sweep: --param must be H or k, got '", opts.param, "'");
  const std::vector<int> grid = parse_grid(opts.grid);
  const ModelConfig base = load_config(opts.config_path, opts.sets);
  DataBundle bundle = load_data_dir(opts.data);

  std::string rows = "param,value,recall20,ndcg20\n";
  std::printf("param,value,recall20,ndcg20\n");
  for (int v : grid) {
    ModelConfig cfg = base;
    if (opts.param == "H")
      cfg.h = v;
    else
      cfg.k = v;
    cfg.validate();
    FitResult result = fit(cfg, bundle.dataset, bundle.visual, bundle.textual);
    if (result.diverged)
      fail_as<NumericError>("sweep point ", opts.param, "=", v, " diverged (",
                            result.divergence_note, ")");
    const SplitDataset split = split_leave_one_out(bundle.dataset);
    const RankingReport test = evaluate_model(
        result.config, result.params, result.cache, bundle.visual, bundle.textual,
        build_eval_examples(split, EvalSplit::test), bundle.dataset.pad_index());
    const std::string row = strcat_all(opts.param, ",", v, ",", fmt_double(test.recall_at(20)),
                                       ",", fmt_double(test.ndcg_at(20)), "\n");
    std::printf("%s", row.c_str());
    std::fflush(stdout);
    rows += row;
  }
  if (!opts.out.empty()) {
    std::ofstream out(opts.out, std::ios::binary);
    require(out.good(), "cannot open ", opts.out, " for writing");
    out << rows;
    require(out.good(), "write failed: ", opts.out);
  }
  return 0;
}

}  // namespace mdsrec::cli
