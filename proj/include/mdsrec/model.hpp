#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mdsrec/common.hpp"
#include "mdsrec/config.hpp"
#include "mdsrec/cooccur.hpp"
#include "mdsrec/data.hpp"
#include "mdsrec/interest.hpp"
#include "mdsrec/relgraph.hpp"
#include "mdsrec/rng.hpp"
#include "mdsrec/seqenc.hpp"
#include "mdsrec/tape.hpp"

// Full model assembly: behavior-injected ID table, graph-convolved modal
// tables, three channel encoders, interest centralization, channel fusion,
// catalog scoring and the combined cross-entropy objective.

namespace mdsrec {

struct ModelParams {
  int n_items = 0;
  int d = 0;
  ad::Parameter e_id;              // (|X|+1) x d; the extra row is PAD
  std::vector<ad::Parameter> pos;  // one table when tied, else one per channel
  ChannelParams channel_id, channel_visual, channel_textual;
  ad::Parameter proj_visual, proj_textual;  // d_m -> d, only without the graph module
  bool has_proj = false;

  ad::Parameter& pos_for(int channel) {
    return pos.size() == 1 ? pos[0] : pos[static_cast<std::size_t>(channel)];
  }

  std::vector<ad::Parameter*> all() {
    std::vector<ad::Parameter*> out;
    out.push_back(&e_id);
    for (auto& p : pos) out.push_back(&p);
    channel_id.collect(out);
    channel_visual.collect(out);
    channel_textual.collect(out);
    if (has_proj) {
      out.push_back(&proj_visual);
      out.push_back(&proj_textual);
    }
    return out;
  }
};

// Parameter creation order is fixed so a seed fully determines the draw.
inline ModelParams init_model_params(const ModelConfig& cfg, int n_items, int d_visual,
                                     int d_textual, Rng& rng) {
  ModelParams p;
  p.n_items = n_items;
  p.d = cfg.d;
  p.e_id = ad::Parameter("e_id", Tensor::randn({n_items + 1, cfg.d}, rng, 0.02));
  if (cfg.tie_positions) {
    p.pos.emplace_back("pos", Tensor::randn({cfg.max_len, cfg.d}, rng, 0.02));
  } else {
    p.pos.emplace_back("pos.id", Tensor::randn({cfg.max_len, cfg.d}, rng, 0.02));
    p.pos.emplace_back("pos.visual", Tensor::randn({cfg.max_len, cfg.d}, rng, 0.02));
    p.pos.emplace_back("pos.textual", Tensor::randn({cfg.max_len, cfg.d}, rng, 0.02));
  }
  p.channel_id = make_channel_params("id", cfg.d, cfg.ffn_width(), cfg.layers, cfg.heads, rng);
  p.channel_visual =
      make_channel_params("visual", cfg.d, cfg.ffn_width(), cfg.layers, cfg.heads, rng);
  p.channel_textual =
      make_channel_params("textual", cfg.d, cfg.ffn_width(), cfg.layers, cfg.heads, rng);
  if (cfg.ablate_mrgc) {
    p.proj_visual = ad::Parameter("proj.visual", glorot({d_visual, cfg.d}, rng));
    p.proj_textual = ad::Parameter("proj.textual", glorot({d_textual, cfg.d}, rng));
    p.has_proj = true;
  }
  return p;
}

// Static per-run artifacts: all of them depend only on the dataset, the raw
// features and the config, so they are built once and reused every step.
struct PipelineCache {
  CooccurrenceMatrix cooccur;
  RelationGraph graph_visual, graph_textual;
  ClusterAssignment clusters_visual, clusters_textual;
  bool has_graphs = false;
  bool has_clusters = false;
  Tensor injected_visual, injected_textual;  // graph inputs (kept for dumps)
};

inline PipelineCache build_pipeline(const ModelConfig& cfg,
                                    const std::vector<std::vector<int>>& train_sequences,
                                    int n_items, const ModalFeatureTable& visual,
                                    const ModalFeatureTable& textual, std::uint64_t seed) {
  PipelineCache cache;
  cache.cooccur = build_cooccurrence(train_sequences, n_items, cfg.ablate_dis,
                                     cfg.cooccur_floor, cfg.cooccur_row_norm);
  if (!cfg.ablate_mrgc) {
    if (cfg.ablate_cre) {
      cache.injected_visual = visual.rows;
      cache.injected_textual = textual.rows;
    } else {
      cache.injected_visual = inject_behavior(visual.rows, cache.cooccur.matrix, cfg.mu_modal);
      cache.injected_textual = inject_behavior(textual.rows, cache.cooccur.matrix, cfg.mu_modal);
    }
    cache.graph_visual = build_topH_graph(cache.injected_visual, cfg.h, "visual",
                                          cfg.graph_row_scale);
    cache.graph_textual = build_topH_graph(cache.injected_textual, cfg.h, "textual",
                                           cfg.graph_row_scale);
    cache.has_graphs = true;
  }
  if (!cfg.ablate_ica) {
    Rng kmeans_rng = substream(seed, "kmeans");
    cache.clusters_visual = kmeans_cluster(visual.rows, cfg.k, kmeans_rng, "visual");
    cache.clusters_textual = kmeans_cluster(textual.rows, cfg.k, kmeans_rng, "textual");
    cache.has_clusters = true;
  }
  return cache;
}

// Train-time Gumbel noise, pre-sampled per batch row so a frozen copy makes
// the forward pass deterministic: logistic shocks log(delta) - log(1-delta),
// delta ~ Uniform(0,1) drawn strictly inside the interval.
struct GumbelNoise {
  std::vector<Tensor> visual, textual;  // per row: len x k
};

inline GumbelNoise make_gumbel_noise(const Batch& batch, int k, Rng& rng) {
  GumbelNoise noise;
  auto draw = [&](std::vector<Tensor>& slot) {
    for (int b = 0; b < batch.size(); ++b) {
      Tensor t({batch.real_len(b), k});
      for (std::int64_t i = 0; i < t.size(); ++i) {
        const double delta = rng.uniform_open();
        t[i] = std::log(delta) - std::log(1.0 - delta);
      }
      slot.push_back(std::move(t));
    }
  };
  draw(noise.visual);
  draw(noise.textual);
  return noise;
}

struct ForwardOutputs {
  ad::Var loss;      // scalar objective
  ad::Var loss_s, loss_visual, loss_textual;  // per-channel mean CE
  ad::Var scores;    // B x |X| combined ranking scores
  ad::Var scores_s, scores_visual, scores_textual;
};

// Builds the whole differentiable computation for one batch on the given
// tape. `noise` enables the stochastic relation draw (training); pass
// nullptr for the noiseless evaluation form.
inline ForwardOutputs build_forward(ad::Tape& tape, const ModelConfig& cfg, ModelParams& params,
                                    const PipelineCache& cache, const ModalFeatureTable& visual,
                                    const ModalFeatureTable& textual, const Batch& batch,
                                    const GumbelNoise* noise) {
  const int n_items = params.n_items;
  const int rows = batch.size();
  require(rows > 0, "build_forward: empty batch");
  if (!cfg.ablate_ica)
    require(cache.has_clusters, "build_forward: interest clusters missing from cache");
  if (!cfg.ablate_mrgc)
    require(cache.has_graphs, "build_forward: relation graphs missing from cache");

  ad::Var e_id_full = tape.param(params.e_id);
  ad::Var e_id = tape.slice_rows(e_id_full, 0, n_items);
  ad::Var injected_id =
      tape.add(tape.scale(tape.spmm(cache.cooccur.matrix, e_id), cfg.mu_id), e_id);

  ad::Var table_visual, table_textual;
  if (cfg.ablate_mrgc) {
    table_visual = tape.matmul(tape.constant(visual.rows), tape.param(params.proj_visual));
    table_textual = tape.matmul(tape.constant(textual.rows), tape.param(params.proj_textual));
  } else {
    ad::Var conv_src = cfg.graphconv_injected_id ? injected_id : e_id;
    table_visual = tape.spmm(cache.graph_visual.adjacency, conv_src);
    table_textual = tape.spmm(cache.graph_textual.adjacency, conv_src);
  }

  std::vector<BlockVars> blocks_id = lift_channel(tape, params.channel_id);
  std::vector<BlockVars> blocks_v = lift_channel(tape, params.channel_visual);
  std::vector<BlockVars> blocks_t = lift_channel(tape, params.channel_textual);

  ad::Var pos_id = tape.param(params.pos_for(0));
  ad::Var pos_v = cfg.tie_positions ? pos_id : tape.param(params.pos_for(1));
  ad::Var pos_t = cfg.tie_positions ? pos_id : tape.param(params.pos_for(2));

  ad::Var centers0_v, centers0_t;
  if (!cfg.ablate_ica) {
    centers0_v = center_features(tape, cache.clusters_visual.assign, table_visual);
    centers0_t = center_features(tape, cache.clusters_textual.assign, table_textual);
  }

  struct ChannelRefs {
    ad::Var table, pos;
    std::vector<BlockVars>* blocks;
    ad::Var centers0;
    const std::vector<Tensor>* noise;
  };
  ChannelRefs ch_v{table_visual, pos_v, &blocks_v, centers0_v,
                   noise ? &noise->visual : nullptr};
  ChannelRefs ch_t{table_textual, pos_t, &blocks_t, centers0_t,
                   noise ? &noise->textual : nullptr};

  std::vector<ad::Var> fused_rows, visual_rows, textual_rows;
  for (int b = 0; b < rows; ++b) {
    const std::vector<int> ids = batch.real_items(b);
    const int len = static_cast<int>(ids.size());
    require(len >= 1, "build_forward: row ", b, " is fully padded");
    require(len <= cfg.max_len, "build_forward: row ", b, " longer than the position table (",
            len, " > ", cfg.max_len, ")");

    auto embed = [&](ad::Var table, ad::Var pos_table) {
      return tape.add(tape.embedding_rows(table, ids), tape.slice_rows(pos_table, 0, len));
    };

    std::vector<ad::Var> states_id = encode_user(tape, embed(injected_id, pos_id), blocks_id,
                                                 cfg.act());
    ad::Var last_id = tape.slice_rows(states_id.back(), len - 1, 1);

    auto modal_last = [&](const ChannelRefs& ch, int row_index) {
      std::vector<ad::Var> states =
          encode_user(tape, embed(ch.table, ch.pos), *ch.blocks, cfg.act());
      ad::Var final_state = states.back();
      if (cfg.ablate_ica) return tape.slice_rows(final_state, len - 1, 1);

      ad::Var centers = centralize_user(tape, ch.centers0, states, *ch.blocks, cfg.act());
      ad::Var logits = tape.matmul(final_state, tape.transpose(centers));  // len x k
      if (ch.noise) {
        const Tensor& shock = (*ch.noise)[static_cast<std::size_t>(row_index)];
        require(shock.same_shape(tape.value(logits)), "gumbel noise shape ",
                shock.shape_string(), " does not match relation logits ",
                tape.value(logits).shape_string());
        logits = tape.add(logits, tape.constant(shock));
      }
      ad::Var gamma = tape.row_softmax(tape.scale(logits, 1.0 / cfg.tau));
      ad::Var centered = tape.add(final_state, tape.matmul(gamma, centers));
      return tape.slice_rows(centered, len - 1, 1);
    };

    ad::Var last_v = modal_last(ch_v, b);
    ad::Var last_t = modal_last(ch_t, b);

    // e_s = sum_m rho_m * e_m + e_id
    ad::Var fused = tape.add(
        tape.add(tape.scale(last_v, cfg.rho_visual), tape.scale(last_t, cfg.rho_textual)),
        last_id);
    fused_rows.push_back(fused);
    visual_rows.push_back(last_v);
    textual_rows.push_back(last_t);
  }

  ad::Var e_s = tape.concat_rows(fused_rows);
  ad::Var e_v = tape.concat_rows(visual_rows);
  ad::Var e_t = tape.concat_rows(textual_rows);

  ForwardOutputs out;
  out.scores_s = tape.matmul(e_s, tape.transpose(e_id));
  out.scores_visual = tape.matmul(e_v, tape.transpose(table_visual));
  out.scores_textual = tape.matmul(e_t, tape.transpose(table_textual));
  out.scores = tape.add(out.scores_s,
                        tape.add(tape.scale(out.scores_visual, cfg.rho_visual),
                                 tape.scale(out.scores_textual, cfg.rho_textual)));

  out.loss_s = tape.mean_all(tape.cross_entropy_rows(out.scores_s, batch.targets));
  out.loss_visual = tape.mean_all(tape.cross_entropy_rows(out.scores_visual, batch.targets));
  out.loss_textual = tape.mean_all(tape.cross_entropy_rows(out.scores_textual, batch.targets));
  out.loss = tape.add(out.loss_s, tape.add(tape.scale(out.loss_visual, cfg.rho_visual),
                                           tape.scale(out.loss_textual, cfg.rho_textual)));
  return out;
}

}  // namespace mdsrec
