#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "mdsrec/common.hpp"
#include "mdsrec/config.hpp"
#include "mdsrec/data.hpp"
#include "mdsrec/eval.hpp"
#include "mdsrec/model.hpp"
#include "mdsrec/rng.hpp"
#include "mdsrec/tape.hpp"

// Optimization loop: Adam with bias correction, epoch scheduling,
// validation-based early stopping, best-checkpoint restore, and the binary
// checkpoint / CSV history formats.

namespace mdsrec {

struct AdamState {
  int step = 0;
  std::vector<Tensor> m, v;  // aligned with the parameter list
};

inline AdamState init_adam(const std::vector<ad::Parameter*>& params) {
  AdamState st;
  for (const auto* p : params) {
    st.m.push_back(Tensor(p->value.shape()));
    st.v.push_back(Tensor(p->value.shape()));
  }
  return st;
}

inline void adam_step(const std::vector<ad::Parameter*>& params, AdamState& st, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  require(params.size() == st.m.size(), "adam_step: state built for ", st.m.size(),
          " tensors, got ", params.size());
  for (const auto* p : params)
    if (!p->grad.all_finite())
      fail_as<NumericError>("adam_step: non-finite gradient in tensor '", p->name, "'");
  ++st.step;
  const double bc1 = 1.0 - std::pow(beta1, st.step);
  const double bc2 = 1.0 - std::pow(beta2, st.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Parameter& p = *params[i];
    Tensor& m = st.m[i];
    Tensor& v = st.v[i];
    for (std::int64_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = beta1 * m[j] + (1.0 - beta1) * g;
      v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
      p.value[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
    }
    p.zero_grad();
  }
}

// Parameters are kept on the 32-bit float grid throughout training so the
// in-memory model, its snapshots, and the serialized checkpoint all hold
// exactly the same values.
inline void round_params_f32(ModelParams& params) {
  for (auto* p : params.all())
    for (std::int64_t j = 0; j < p->value.size(); ++j)
      p->value[j] = static_cast<double>(static_cast<float>(p->value[j]));
}

struct EpochRecord {
  int epoch;
  double train_loss;
  double valid_recall10;
  double valid_ndcg10;
};

inline void write_history(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open ", path, " for writing");
  out << "epoch,train_loss,valid_recall10,valid_ndcg10\n";
  for (const auto& rec : history)
    out << rec.epoch << "," << fmt_double(rec.train_loss) << ","
        << fmt_double(rec.valid_recall10) << "," << fmt_double(rec.valid_ndcg10) << "\n";
  require(out.good(), "write failed: ", path);
}

struct FitResult {
  ModelConfig config;
  ModelParams params;
  PipelineCache cache;
  std::vector<EpochRecord> history;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_recall10 = -1.0;
  bool stopped_early = false;
  bool diverged = false;
  std::string divergence_note;
};

// Full training loop. The static pipeline (co-occurrence, relation graphs,
// clusters) is built once up front; each epoch shuffles the train batches,
// steps Adam, scores validation Recall@10, and keeps a snapshot of the best
// parameters, which are restored before returning. A non-finite loss or
// gradient stops training and keeps the best snapshot seen so far.
inline FitResult fit(const ModelConfig& cfg, const InteractionDataset& ds,
                     const ModalFeatureTable& visual, const ModalFeatureTable& textual) {
  FitResult result;
  result.config = cfg;
  result.config.validate();

  const SplitDataset split = split_leave_one_out(ds);
  const auto train_examples = build_train_examples(split, cfg.prefix_augment);
  const auto valid_examples = build_eval_examples(split, EvalSplit::valid);
  require(!train_examples.empty(), "fit: no trainable examples");

  result.cache = build_pipeline(cfg, split.train, ds.n_items, visual, textual, cfg.seed);

  Rng init_rng = substream(cfg.seed, "init");
  result.params = init_model_params(cfg, ds.n_items, visual.d_m, textual.d_m, init_rng);
  round_params_f32(result.params);

  Rng order_rng = substream(cfg.seed, "data");
  Rng gumbel_rng = substream(cfg.seed, "gumbel");
  AdamState adam = init_adam(result.params.all());

  std::vector<Tensor> best_snapshot;
  auto take_snapshot = [&]() {
    best_snapshot.clear();
    for (auto* p : result.params.all()) best_snapshot.push_back(p->value);
  };
  auto restore_snapshot = [&]() {
    if (best_snapshot.empty()) return;
    auto all = result.params.all();
    for (std::size_t i = 0; i < all.size(); ++i) all[i]->value = best_snapshot[i];
  };

  int stale = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto batches =
        make_batches(train_examples, cfg.batch_size, cfg.max_len, ds.pad_index(), &order_rng);
    double loss_sum = 0.0;
    std::int64_t example_count = 0;
    bool bad_step = false;
    for (const Batch& batch : batches) {
      GumbelNoise noise;
      if (!cfg.ablate_ica) noise = make_gumbel_noise(batch, cfg.k, gumbel_rng);
      try {
        ad::Tape tape;
        ForwardOutputs f = build_forward(tape, result.config, result.params, result.cache,
                                         visual, textual, batch,
                                         cfg.ablate_ica ? nullptr : &noise);
        const double loss = tape.value(f.loss)[0];
        if (!std::isfinite(loss)) {
          result.divergence_note = strcat_all("non-finite training loss at epoch ", epoch);
          bad_step = true;
          break;
        }
        tape.backward(f.loss);
        adam_step(result.params.all(), adam, cfg.lr);
        round_params_f32(result.params);
        loss_sum += loss * batch.size();
        example_count += batch.size();
      } catch (const NumericError& e) {
        result.divergence_note = strcat_all(e.what(), " at epoch ", epoch);
        bad_step = true;
        break;
      }
    }
    if (bad_step) {
      result.diverged = true;
      break;
    }

    RankingReport valid = evaluate_model(result.config, result.params, result.cache, visual,
                                         textual, valid_examples, ds.pad_index());
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(example_count);
    rec.valid_recall10 = valid.recall_at(10);
    rec.valid_ndcg10 = valid.ndcg_at(10);
    result.history.push_back(rec);
    result.epochs_run = epoch;

    if (rec.valid_recall10 > result.best_recall10) {
      result.best_recall10 = rec.valid_recall10;
      result.best_epoch = epoch;
      take_snapshot();
      stale = 0;
    } else {
      ++stale;
      if (stale >= cfg.patience) {
        result.stopped_early = true;
        break;
      }
    }
  }

  restore_snapshot();
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic "MDSC", u32 version, length-prefixed config text,
// u32 tensor count, then per tensor: length-prefixed name, u32 rank, u32
// dims, row-major little-endian f32 payload.

constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                            ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open ", path, " for writing");
  out.write("MDSC", 4);
  detail::write_u32(out, kCheckpointVersion);
  const std::string echo = cfg.resolved();
  detail::write_u32(out, static_cast<std::uint32_t>(echo.size()));
  out.write(echo.data(), static_cast<std::streamsize>(echo.size()));
  auto all = params.all();
  detail::write_u32(out, static_cast<std::uint32_t>(all.size()));
  for (const auto* p : all) {
    detail::write_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    detail::write_u32(out, static_cast<std::uint32_t>(p->value.rank()));
    for (int a = 0; a < p->value.rank(); ++a)
      detail::write_u32(out, static_cast<std::uint32_t>(p->value.dim(a)));
    for (std::int64_t j = 0; j < p->value.size(); ++j)
      detail::write_f32(out, static_cast<float>(p->value[j]));
  }
  require(out.good(), "write failed: ", path);
}

struct Checkpoint {
  ModelConfig config;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) fail_as<DataError>("cannot open checkpoint ", path);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in.good() || std::string(magic, 4) != "MDSC")
    fail_as<DataError>(path, ": not a checkpoint file (bad magic)");
  const std::uint32_t version = detail::read_u32(in, path);
  if (version != kCheckpointVersion)
    fail_as<DataError>(path, ": unsupported checkpoint version ", version);
  const std::uint32_t echo_len = detail::read_u32(in, path);
  std::string echo(echo_len, '\0');
  in.read(echo.data(), static_cast<std::streamsize>(echo_len));
  if (!in.good()) fail_as<DataError>(path, ": truncated config block");

  Checkpoint ck;
  for (const auto& [k, v] : parse_kv_text(echo, path + " (config echo)")) ck.config.set(k, v);
  ck.config.validate();

  const std::uint32_t n_tensors = detail::read_u32(in, path);
  for (std::uint32_t t = 0; t < n_tensors; ++t) {
    const std::uint32_t name_len = detail::read_u32(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (!in.good()) fail_as<DataError>(path, ": truncated tensor name");
    if (ck.find(name)) fail_as<DataError>(path, ": duplicate tensor '", name, "'");
    const std::uint32_t rank = detail::read_u32(in, path);
    if (rank == 0 || rank > 8) fail_as<DataError>(path, ": bad tensor rank ", rank);
    std::vector<int> shape;
    for (std::uint32_t a = 0; a < rank; ++a)
      shape.push_back(static_cast<int>(detail::read_u32(in, path)));
    Tensor ten(shape);
    for (std::int64_t j = 0; j < ten.size(); ++j)
      ten[j] = static_cast<double>(detail::read_f32(in, path));
    ck.tensors.emplace_back(std::move(name), std::move(ten));
  }
  return ck;
}

// Rebuilds the parameter struct from a checkpoint: shapes come from the
// config echo, values from the stored tensors; every stored tensor must be
// used and every expected one present.
inline ModelParams params_from_checkpoint(const Checkpoint& ck) {
  const Tensor* e_id = ck.find("e_id");
  if (!e_id) fail_as<DataError>("checkpoint has no e_id tensor");
  const int n_items = e_id->dim(0) - 1;
  int d_visual = 0, d_textual = 0;
  if (ck.config.ablate_mrgc) {
    const Tensor* pv = ck.find("proj.visual");
    const Tensor* pt = ck.find("proj.textual");
    if (!pv || !pt) fail_as<DataError>("checkpoint is missing modal projection tensors");
    d_visual = pv->dim(0);
    d_textual = pt->dim(0);
  }
  Rng scratch(0);
  ModelParams params = init_model_params(ck.config, n_items, d_visual, d_textual, scratch);
  std::size_t used = 0;
  for (auto* p : params.all()) {
    const Tensor* stored = ck.find(p->name);
    if (!stored) fail_as<DataError>("checkpoint is missing tensor '", p->name, "'");
    if (!stored->same_shape(p->value))
      fail_as<DataError>("checkpoint tensor '", p->name, "' has shape ",
                         stored->shape_string(), ", expected ", p->value.shape_string());
    p->value = *stored;
    ++used;
  }
  if (used != ck.tensors.size())
    fail_as<DataError>("checkpoint holds ", ck.tensors.size(), " tensors but the model uses ",
                       used);
  return params;
}

}  // namespace mdsrec
