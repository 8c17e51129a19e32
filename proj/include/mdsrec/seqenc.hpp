#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "mdsrec/common.hpp"
#include "mdsrec/rng.hpp"
#include "mdsrec/tape.hpp"
#include "mdsrec/tensor.hpp"

// Causal Transformer encoder, instantiated once per channel (ID, visual,
// textual) with independent parameters. Blocks follow the standard layout:
// multi-head self-attention and a feed-forward, each wrapped in residual +
// layer norm. The same per-layer Q/K/V/mix/FFN tensors are reused by the
// interest-centralizing attention path.

namespace mdsrec {

struct HeadParams {
  ad::Parameter q, k, v;  // each d x d_h
};

struct BlockParams {
  std::vector<HeadParams> heads;
  ad::Parameter mix;      // d x d
  ad::Parameter w1, b1;   // d x d_ff, d_ff
  ad::Parameter w2, b2;   // d_ff x d, d
};

struct ChannelParams {
  std::string name;
  std::vector<BlockParams> blocks;

  void collect(std::vector<ad::Parameter*>& out) {
    for (auto& b : blocks) {
      for (auto& h : b.heads) {
        out.push_back(&h.q);
        out.push_back(&h.k);
        out.push_back(&h.v);
      }
      out.push_back(&b.mix);
      out.push_back(&b.w1);
      out.push_back(&b.b1);
      out.push_back(&b.w2);
      out.push_back(&b.b2);
    }
  }
};

inline Tensor glorot(std::vector<int> shape, Rng& rng) {
  const double stddev = std::sqrt(2.0 / (shape[0] + shape[1]));
  return Tensor::randn(std::move(shape), rng, stddev);
}

inline ChannelParams make_channel_params(const std::string& name, int d, int d_ff, int layers,
                                         int heads, Rng& rng) {
  require(heads >= 1 && d % heads == 0, "channel ", name, ": d (", d,
          ") must divide into heads (", heads, ")");
  const int d_h = d / heads;
  ChannelParams ch;
  ch.name = name;
  for (int l = 0; l < layers; ++l) {
    BlockParams b;
    const std::string prefix = name + ".l" + std::to_string(l);
    for (int h = 0; h < heads; ++h) {
      const std::string hp = prefix + ".h" + std::to_string(h);
      b.heads.push_back({ad::Parameter(hp + ".q", glorot({d, d_h}, rng)),
                         ad::Parameter(hp + ".k", glorot({d, d_h}, rng)),
                         ad::Parameter(hp + ".v", glorot({d, d_h}, rng))});
    }
    b.mix = ad::Parameter(prefix + ".mix", glorot({d, d}, rng));
    b.w1 = ad::Parameter(prefix + ".w1", glorot({d, d_ff}, rng));
    b.b1 = ad::Parameter(prefix + ".b1", Tensor::zeros({d_ff}));
    b.w2 = ad::Parameter(prefix + ".w2", glorot({d_ff, d}, rng));
    b.b2 = ad::Parameter(prefix + ".b2", Tensor::zeros({d}));
    ch.blocks.push_back(std::move(b));
  }
  return ch;
}

// Tape handles for one channel's blocks; created once per tape and shared by
// the encoder and centralized-attention paths so gradients from both
// accumulate into the same parameters.
struct BlockVars {
  std::vector<std::array<ad::Var, 3>> heads;  // q, k, v
  ad::Var mix, w1, b1, w2, b2;
};

inline std::vector<BlockVars> lift_channel(ad::Tape& tape, ChannelParams& ch) {
  std::vector<BlockVars> out;
  for (auto& b : ch.blocks) {
    BlockVars v;
    for (auto& h : b.heads)
      v.heads.push_back({tape.param(h.q), tape.param(h.k), tape.param(h.v)});
    v.mix = tape.param(b.mix);
    v.w1 = tape.param(b.w1);
    v.b1 = tape.param(b.b1);
    v.w2 = tape.param(b.w2);
    v.b2 = tape.param(b.b2);
    out.push_back(std::move(v));
  }
  return out;
}

// Same handles but as constants: freezes this path's contribution, used to
// attribute gradients between the two weight-sharing paths.
inline std::vector<BlockVars> lift_channel_const(ad::Tape& tape, const ChannelParams& ch) {
  std::vector<BlockVars> out;
  for (const auto& b : ch.blocks) {
    BlockVars v;
    for (const auto& h : b.heads)
      v.heads.push_back(
          {tape.constant(h.q.value), tape.constant(h.k.value), tape.constant(h.v.value)});
    v.mix = tape.constant(b.mix.value);
    v.w1 = tape.constant(b.w1.value);
    v.b1 = tape.constant(b.b1.value);
    v.w2 = tape.constant(b.w2.value);
    v.b2 = tape.constant(b.b2.value);
    out.push_back(std::move(v));
  }
  return out;
}

inline Tensor causal_mask(int len) {
  Tensor m({len, len});
  for (int i = 0; i < len; ++i)
    for (int j = 0; j <= i; ++j) m(i, j) = 1.0;
  return m;
}

// One user's unpadded block (len x d) through all L blocks. Returns states
// for layers 0..L (index 0 is the input). Position i attends to j <= i;
// attention logits are scaled by 1/sqrt(d_h).
inline std::vector<ad::Var> encode_user(ad::Tape& tape, ad::Var x0,
                                        const std::vector<BlockVars>& blocks,
                                        ad::Activation act) {
  const int len = tape.value(x0).dim(0);
  require(len >= 1, "encode_user: empty sequence");
  const Tensor mask = causal_mask(len);

  std::vector<ad::Var> states;
  states.push_back(x0);
  ad::Var x = x0;
  for (const BlockVars& b : blocks) {
    const int d_h = tape.value(b.heads[0][0]).dim(1);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_h));
    std::vector<ad::Var> head_outs;
    for (const auto& h : b.heads) {
      ad::Var q = tape.matmul(x, h[0]);
      ad::Var k = tape.matmul(x, h[1]);
      ad::Var v = tape.matmul(x, h[2]);
      ad::Var logits = tape.scale(tape.matmul(q, tape.transpose(k)), scale);
      ad::Var attn = tape.row_softmax(logits, mask);
      head_outs.push_back(tape.matmul(attn, v));
    }
    ad::Var mixed = tape.matmul(tape.concat_cols(head_outs), b.mix);
    ad::Var attn_out = tape.layer_norm(tape.add(x, mixed));
    ad::Var hidden = tape.activate(tape.add_rowvec(tape.matmul(attn_out, b.w1), b.b1), act);
    ad::Var ff = tape.add_rowvec(tape.matmul(hidden, b.w2), b.b2);
    x = tape.layer_norm(tape.add(attn_out, ff));
    states.push_back(x);
  }
  return states;
}

}  // namespace mdsrec
