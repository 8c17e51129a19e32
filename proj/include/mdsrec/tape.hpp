#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mdsrec/common.hpp"
#include "mdsrec/sparse.hpp"
#include "mdsrec/tensor.hpp"

// Reverse-mode autodiff over dense tensors via an explicit tape of op
// records. Forward ops append a record; backward(loss) seeds the loss adjoint
// and sweeps the tape in reverse, accumulating into Parameter::grad.
// Reductions run in a fixed sequential order so fixed seeds give
// bit-identical runs.

#if !defined(MDSREC_CHECK_FINITE) && !defined(NDEBUG)
#define MDSREC_CHECK_FINITE 1
#endif

namespace mdsrec::ad {

// A persistent trainable tensor: survives across tapes, accumulates gradients.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor init)
      : name(std::move(n)), value(std::move(init)), grad(Tensor::zeros(value.shape())) {}

  void zero_grad() { grad.fill(0.0); }
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class Activation { gelu, relu };

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves ----

  Var constant(Tensor v) {
    check_finite(v, "constant");
    return make_node(std::move(v), nullptr, false);
  }

  Var param(Parameter& p) {
    check_finite(p.value, p.name.c_str());
    Var v = make_node(Tensor(), &p, false);
    return v;
  }

  const Tensor& value(Var v) const {
    const Node& n = node(v);
    return n.param ? n.param->value : n.owned;
  }

  // Adjoint accumulated by backward passes; zeros if the node was never on a
  // differentiated path.
  const Tensor& grad(Var v) {
    Node& n = node_mut(v);
    if (n.accum.empty()) n.accum = Tensor::zeros(value(v).shape());
    return n.accum;
  }

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_records() const { return records_.size(); }

  // ---- forward ops ----

  Var matmul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.rank() == 2 && B.rank() == 2 && A.dim(1) == B.dim(0),
            "matmul: shape mismatch ", A.shape_string(), " x ", B.shape_string());
    const int m = A.dim(0), k = A.dim(1), n = B.dim(1);
    Tensor out({m, n});
    matmul_into(out, A, B);
    Var o = make_op(std::move(out), "matmul");
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      const Tensor& Av = value(a);
      const Tensor& Bv = value(b);
      Tensor& dA = sink.adj(a, {m, k});
      // dA += dout * B^T
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const double g = dout(i, j);
          if (g == 0.0) continue;
          for (int p = 0; p < k; ++p) dA(i, p) += g * Bv(p, j);
        }
      Tensor& dB = sink.adj(b, {k, n});
      // dB += A^T * dout
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          const double av = Av(i, p);
          if (av == 0.0) continue;
          for (int j = 0; j < n; ++j) dB(p, j) += av * dout(i, j);
        }
    });
    return o;
  }

  Var transpose(Var a) {
    const Tensor& A = value(a);
    require(A.rank() == 2, "transpose: rank-2 tensor required, got ", A.shape_string());
    const int m = A.dim(0), n = A.dim(1);
    Tensor out({n, m});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out(j, i) = A(i, j);
    Var o = make_op(std::move(out), "transpose");
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      Tensor& dA = sink.adj(a, {m, n});
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) dA(i, j) += dout(j, i);
    });
    return o;
  }

  Var add(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.same_shape(B), "add: shape mismatch ", A.shape_string(), " vs ",
            B.shape_string());
    Tensor out = A;
    out.add_inplace(B);
    Var o = make_op(std::move(out), "add");
    const std::vector<int> shape = A.shape();
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      sink.adj(a, shape).add_inplace(dout);
      sink.adj(b, shape).add_inplace(dout);
    });
    return o;
  }

  Var sub(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.same_shape(B), "sub: shape mismatch ", A.shape_string(), " vs ",
            B.shape_string());
    Tensor out = A;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= B[i];
    Var o = make_op(std::move(out), "sub");
    const std::vector<int> shape = A.shape();
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      sink.adj(a, shape).add_inplace(dout);
      Tensor& dB = sink.adj(b, shape);
      for (std::int64_t i = 0; i < dout.size(); ++i) dB[i] -= dout[i];
    });
    return o;
  }

  Var mul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require(A.same_shape(B), "mul: shape mismatch ", A.shape_string(), " vs ",
            B.shape_string());
    Tensor out = A;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= B[i];
    Var o = make_op(std::move(out), "mul");
    const std::vector<int> shape = A.shape();
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      const Tensor& Av = value(a);
      const Tensor& Bv = value(b);
      Tensor& dA = sink.adj(a, shape);
      Tensor& dB = sink.adj(b, shape);
      for (std::int64_t i = 0; i < dout.size(); ++i) {
        dA[i] += dout[i] * Bv[i];
        dB[i] += dout[i] * Av[i];
      }
    });
    return o;
  }

  Var scale(Var a, double c) {
    Tensor out = value(a);
    out.scale_inplace(c);
    Var o = make_op(std::move(out), "scale");
    const std::vector<int> shape = value(a).shape();
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      Tensor& dA = sink.adj(a, shape);
      for (std::int64_t i = 0; i < dout.size(); ++i) dA[i] += c * dout[i];
    });
    return o;
  }

  Var add_scalar(Var a, double c) {
    Tensor out = value(a);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] += c;
    Var o = make_op(std::move(out), "add_scalar");
    const std::vector<int> shape = value(a).shape();
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      sink.adj(a, shape).add_inplace(dout);
    });
    return o;
  }

  // X (m x n) + bias broadcast over rows; bias may be rank-1 (n) or (1 x n)
  Var add_rowvec(Var x, Var bias) {
    const Tensor& X = value(x);
    const Tensor& B = value(bias);
    require(X.rank() == 2 && B.size() == X.dim(1), "add_rowvec: ", X.shape_string(),
            " with bias ", B.shape_string());
    const int m = X.dim(0), n = X.dim(1);
    Tensor out = X;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out(i, j) += B[j];
    Var o = make_op(std::move(out), "add_rowvec");
    const std::vector<int> bshape = B.shape();
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      sink.adj(x, {m, n}).add_inplace(dout);
      Tensor& dB = sink.adj(bias, bshape);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) dB[j] += dout(i, j);
    });
    return o;
  }

  // Row-wise softmax over allowed entries. mask entries: 1 allowed, 0
  // forbidden; empty mask means all allowed. A row with no allowed entry is a
  // hard error (valid masks never produce one). The mask is only read during
  // the forward computation (the backward needs just the outputs), so it is
  // not retained.
  Var row_softmax(Var x, const Tensor& mask = Tensor()) {
    const Tensor& X = value(x);
    require(X.rank() == 2, "row_softmax: rank-2 tensor required, got ", X.shape_string());
    if (!mask.empty())
      require(mask.same_shape(X), "row_softmax: mask shape ", mask.shape_string(),
              " vs input ", X.shape_string());
    const int m = X.dim(0), n = X.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j)
        if (mask.empty() || mask(i, j) != 0.0) mx = std::max(mx, X(i, j));
      require(std::isfinite(mx), "row_softmax: row ", i, " has no allowed entries");
      double z = 0.0;
      for (int j = 0; j < n; ++j) {
        if (mask.empty() || mask(i, j) != 0.0) {
          out(i, j) = std::exp(X(i, j) - mx);
          z += out(i, j);
        }
      }
      for (int j = 0; j < n; ++j) out(i, j) /= z;
    }
    Var o = make_op(std::move(out), "row_softmax");
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      const Tensor& Y = value(o);
      Tensor& dX = sink.adj(x, {m, n});
      for (int i = 0; i < m; ++i) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += dout(i, j) * Y(i, j);
        for (int j = 0; j < n; ++j) dX(i, j) += Y(i, j) * (dout(i, j) - dot);
      }
    });
    return o;
  }

  Var gelu(Var a) {
    const Tensor& A = value(a);
    Tensor out = A;
    for (std::int64_t i = 0; i < out.size(); ++i) {
      const double v = out[i];
      out[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    }
    Var o = make_op(std::move(out), "gelu");
    const std::vector<int> shape = A.shape();
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      const Tensor& Av = value(a);
      Tensor& dA = sink.adj(a, shape);
      for (std::int64_t i = 0; i < dout.size(); ++i) {
        const double v = Av[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = std::exp(-0.5 * v * v) * kInvSqrt2Pi;
        dA[i] += dout[i] * (cdf + v * pdf);
      }
    });
    return o;
  }

  Var relu(Var a) {
    const Tensor& A = value(a);
    Tensor out = A;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
    Var o = make_op(std::move(out), "relu");
    const std::vector<int> shape = A.shape();
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      const Tensor& Av = value(a);
      Tensor& dA = sink.adj(a, shape);
      for (std::int64_t i = 0; i < dout.size(); ++i)
        if (Av[i] > 0.0) dA[i] += dout[i];
    });
    return o;
  }

  Var activate(Var a, Activation act) { return act == Activation::gelu ? gelu(a) : relu(a); }

  // Per-row normalization to zero mean / unit variance, no learned affine.
  Var layer_norm(Var x, double eps = 1e-5) {
    const Tensor& X = value(x);
    require(X.rank() == 2, "layer_norm: rank-2 tensor required, got ", X.shape_string());
    const int m = X.dim(0), n = X.dim(1);
    Tensor out({m, n});
    Tensor inv_std({m});
    for (int i = 0; i < m; ++i) {
      double mean = 0.0;
      for (int j = 0; j < n; ++j) mean += X(i, j);
      mean /= n;
      double var = 0.0;
      for (int j = 0; j < n; ++j) {
        const double d = X(i, j) - mean;
        var += d * d;
      }
      var /= n;
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std(i) = is;
      for (int j = 0; j < n; ++j) out(i, j) = (X(i, j) - mean) * is;
    }
    Var o = make_op(std::move(out), "layer_norm");
    record(o, [=, this, inv_std = std::move(inv_std)](const Tensor& dout, AdjointSink& sink) {
      const Tensor& Y = value(o);
      Tensor& dX = sink.adj(x, {m, n});
      for (int i = 0; i < m; ++i) {
        double mean_dy = 0.0, mean_dyy = 0.0;
        for (int j = 0; j < n; ++j) {
          mean_dy += dout(i, j);
          mean_dyy += dout(i, j) * Y(i, j);
        }
        mean_dy /= n;
        mean_dyy /= n;
        for (int j = 0; j < n; ++j)
          dX(i, j) += inv_std(i) * (dout(i, j) - mean_dy - Y(i, j) * mean_dyy);
      }
    });
    return o;
  }

  Var concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    const int m = value(parts[0]).dim(0);
    int n = 0;
    for (Var p : parts) {
      const Tensor& t = value(p);
      require(t.rank() == 2 && t.dim(0) == m, "concat_cols: row mismatch ",
              t.shape_string(), " vs ", m, " rows");
      n += t.dim(1);
    }
    Tensor out({m, n});
    int off = 0;
    for (Var p : parts) {
      const Tensor& t = value(p);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < t.dim(1); ++j) out(i, off + j) = t(i, j);
      off += t.dim(1);
    }
    Var o = make_op(std::move(out), "concat_cols");
    std::vector<std::pair<Var, int>> spans;
    for (Var p : parts) spans.emplace_back(p, value(p).dim(1));
    record(o, [=, this, spans = std::move(spans)](const Tensor& dout, AdjointSink& sink) {
      int off2 = 0;
      for (const auto& [p, w] : spans) {
        Tensor& dP = sink.adj(p, {m, w});
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < w; ++j) dP(i, j) += dout(i, off2 + j);
        off2 += w;
      }
    });
    return o;
  }

  Var concat_rows(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    const int n = value(parts[0]).dim(1);
    int m = 0;
    for (Var p : parts) {
      const Tensor& t = value(p);
      require(t.rank() == 2 && t.dim(1) == n, "concat_rows: col mismatch ",
              t.shape_string(), " vs ", n, " cols");
      m += t.dim(0);
    }
    Tensor out({m, n});
    int off = 0;
    for (Var p : parts) {
      const Tensor& t = value(p);
      for (int i = 0; i < t.dim(0); ++i)
        for (int j = 0; j < n; ++j) out(off + i, j) = t(i, j);
      off += t.dim(0);
    }
    Var o = make_op(std::move(out), "concat_rows");
    std::vector<std::pair<Var, int>> spans;
    for (Var p : parts) spans.emplace_back(p, value(p).dim(0));
    record(o, [=, this, spans = std::move(spans)](const Tensor& dout, AdjointSink& sink) {
      int off2 = 0;
      for (const auto& [p, h] : spans) {
        Tensor& dP = sink.adj(p, {h, n});
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < n; ++j) dP(i, j) += dout(off2 + i, j);
        off2 += h;
      }
    });
    return o;
  }

  Var slice_rows(Var a, int start, int count) {
    const Tensor& A = value(a);
    require(A.rank() == 2 && start >= 0 && count >= 0 && start + count <= A.dim(0),
            "slice_rows: [", start, ", ", start + count, ") of ", A.shape_string());
    const int n = A.dim(1), m = A.dim(0);
    Tensor out({count, n});
    for (int i = 0; i < count; ++i)
      for (int j = 0; j < n; ++j) out(i, j) = A(start + i, j);
    Var o = make_op(std::move(out), "slice_rows");
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      Tensor& dA = sink.adj(a, {m, n});
      for (int i = 0; i < count; ++i)
        for (int j = 0; j < n; ++j) dA(start + i, j) += dout(i, j);
    });
    return o;
  }

  // Embed a block into an otherwise-zero matrix of total_rows rows.
  Var pad_rows(Var a, int total_rows, int offset) {
    const Tensor& A = value(a);
    require(A.rank() == 2 && offset >= 0 && offset + A.dim(0) <= total_rows,
            "pad_rows: block ", A.shape_string(), " at row ", offset, " into ", total_rows,
            " rows");
    const int h = A.dim(0), n = A.dim(1);
    Tensor out({total_rows, n});
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < n; ++j) out(offset + i, j) = A(i, j);
    Var o = make_op(std::move(out), "pad_rows");
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      Tensor& dA = sink.adj(a, {h, n});
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < n; ++j) dA(i, j) += dout(offset + i, j);
    });
    return o;
  }

  // Gather rows of a (possibly computed) table.
  Var embedding_rows(Var table, std::vector<int> ids) {
    const Tensor& T = value(table);
    require(T.rank() == 2, "embedding_rows: table must be rank-2, got ", T.shape_string());
    const int n = T.dim(1), rows = T.dim(0);
    for (int id : ids)
      require(id >= 0 && id < rows, "embedding_rows: id ", id, " outside table of ", rows,
              " rows");
    Tensor out({static_cast<int>(ids.size()), n});
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < n; ++j) out(static_cast<int>(i), j) = T(ids[i], j);
    Var o = make_op(std::move(out), "embedding_rows");
    record(o, [=, this, ids = std::move(ids)](const Tensor& dout, AdjointSink& sink) {
      Tensor& dT = sink.adj(table, {rows, n});
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < n; ++j) dT(ids[i], j) += dout(static_cast<int>(i), j);
    });
    return o;
  }

  // S is a constant sparse matrix (graph/assignment/co-occurrence); gradient
  // flows into the dense operand only. S must outlive the tape.
  Var spmm(const SparseMatrix& s, Var d) {
    const Tensor& D = value(d);
    require(D.rank() == 2 && D.dim(0) == s.cols(), "spmm: sparse ", s.rows(), "x", s.cols(),
            " times dense ", D.shape_string());
    Tensor out = s.multiply_dense(D);
    Var o = make_op(std::move(out), "spmm");
    const SparseMatrix* sp = &s;
    const int rows = D.dim(0), cols = D.dim(1);
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      Tensor delta = sp->transposed().multiply_dense(dout);
      sink.adj(d, {rows, cols}).add_inplace(delta);
    });
    return o;
  }

  Var sum_all(Var a) {
    const Tensor& A = value(a);
    double s = 0.0;
    for (std::int64_t i = 0; i < A.size(); ++i) s += A[i];
    Var o = make_op(Tensor::from({1}, {s}), "sum_all");
    const std::vector<int> shape = A.shape();
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      Tensor& dA = sink.adj(a, shape);
      for (std::int64_t i = 0; i < dA.size(); ++i) dA[i] += dout[0];
    });
    return o;
  }

  Var mean_all(Var a) {
    const Tensor& A = value(a);
    require(A.size() > 0, "mean_all: empty tensor");
    double s = 0.0;
    for (std::int64_t i = 0; i < A.size(); ++i) s += A[i];
    const double inv = 1.0 / static_cast<double>(A.size());
    Var o = make_op(Tensor::from({1}, {s * inv}), "mean_all");
    const std::vector<int> shape = A.shape();
    record(o, [=, this](const Tensor& dout, AdjointSink& sink) {
      Tensor& dA = sink.adj(a, shape);
      for (std::int64_t i = 0; i < dA.size(); ++i) dA[i] += dout[0] * inv;
    });
    return o;
  }

  Var dot(Var a, Var b) { return sum_all(mul(a, b)); }

  // Per-row -log softmax(scores)[target], numerically stable.
  Var cross_entropy_rows(Var scores, std::vector<int> targets) {
    const Tensor& S = value(scores);
    require(S.rank() == 2 && S.dim(0) == static_cast<int>(targets.size()),
            "cross_entropy_rows: scores ", S.shape_string(), " vs ", targets.size(),
            " targets");
    const int m = S.dim(0), n = S.dim(1);
    for (int t : targets)
      require(t >= 0 && t < n, "cross_entropy_rows: target ", t, " outside ", n, " classes");
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
      double mx = S(i, 0);
      for (int j = 1; j < n; ++j) mx = std::max(mx, S(i, j));
      double z = 0.0;
      for (int j = 0; j < n; ++j) z += std::exp(S(i, j) - mx);
      out(i) = std::log(z) + mx - S(i, targets[static_cast<std::size_t>(i)]);
    }
    Var o = make_op(std::move(out), "cross_entropy_rows");
    record(o, [=, this, targets = std::move(targets)](const Tensor& dout, AdjointSink& sink) {
      const Tensor& Sv = value(scores);
      Tensor& dS = sink.adj(scores, {m, n});
      for (int i = 0; i < m; ++i) {
        const double g = dout(i);
        if (g == 0.0) continue;
        double mx = Sv(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, Sv(i, j));
        double z = 0.0;
        for (int j = 0; j < n; ++j) z += std::exp(Sv(i, j) - mx);
        for (int j = 0; j < n; ++j) dS(i, j) += g * (std::exp(Sv(i, j) - mx) / z);
        dS(i, targets[static_cast<std::size_t>(i)]) -= g;
      }
    });
    return o;
  }

  // ---- backward ----

  // Fills Parameter::grad (and per-node adjoints) for everything the loss
  // depends on. Repeated calls accumulate.
  void backward(Var loss) {
    const Node& ln = node(loss);
    require(ln.produced_by_op,
            "backward: tensor is not connected to a recorded graph (leaf, not an op output)");
    require(value(loss).size() == 1, "backward: loss must be a 1-element tensor, got ",
            value(loss).shape_string());

    AdjointSink sink(nodes_.size());
    sink.adj(loss, value(loss).shape())[0] = 1.0;

    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      const Tensor& dout = sink.peek(it->out_id);
      if (dout.empty()) continue;  // not on the loss's path
      it->back(dout, sink);
    }

    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Tensor& a = sink.peek(static_cast<int>(i));
      if (a.empty()) continue;
#if MDSREC_CHECK_FINITE
      if (!a.all_finite())
        fail_as<NumericError>("backward: non-finite gradient at node ", i, " (",
                              nodes_[i]->op_name, ")");
#endif
      Node& n = *nodes_[i];
      if (n.accum.empty()) n.accum = Tensor::zeros(a.shape());
      n.accum.add_inplace(a);
      if (n.param) n.param->grad.add_inplace(a);
    }
  }

 private:
  struct Node {
    Tensor owned;           // op outputs and constants
    Parameter* param = nullptr;  // set for parameter leaves
    Tensor accum;           // accumulated adjoint across backward calls
    bool produced_by_op = false;
    const char* op_name = "leaf";
  };

 public:
  // Lazily-allocated adjoint table for one backward sweep. Pass-local so that
  // repeated backward calls accumulate exactly (never double-count).
  class AdjointSink {
   public:
    explicit AdjointSink(std::size_t n) : adj_(n) {}
    Tensor& adj(Var v, const std::vector<int>& shape) {
      Tensor& t = adj_[static_cast<std::size_t>(v.id)];
      if (t.empty() && Tensor::count(shape) > 0) t = Tensor::zeros(shape);
      return t;
    }
    const Tensor& peek(int id) const { return adj_[static_cast<std::size_t>(id)]; }

   private:
    std::vector<Tensor> adj_;
  };

 private:
  using BackFn = std::function<void(const Tensor&, AdjointSink&)>;

  struct Record {
    int out_id;
    BackFn back;
  };

  Var make_node(Tensor owned, Parameter* p, bool produced) {
    auto n = std::make_unique<Node>();
    n->owned = std::move(owned);
    n->param = p;
    n->produced_by_op = produced;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  Var make_op(Tensor out, const char* name) {
    check_finite(out, name);
    Var v = make_node(std::move(out), nullptr, true);
    nodes_.back()->op_name = name;
    return v;
  }

  void record(Var out, BackFn fn) { records_.push_back({out.id, std::move(fn)}); }

  const Node& node(Var v) const {
    require(v.valid() && v.id < static_cast<int>(nodes_.size()), "invalid Var handle");
    return *nodes_[static_cast<std::size_t>(v.id)];
  }
  Node& node_mut(Var v) {
    require(v.valid() && v.id < static_cast<int>(nodes_.size()), "invalid Var handle");
    return *nodes_[static_cast<std::size_t>(v.id)];
  }

  void check_finite(const Tensor& t, const char* what) {
#if MDSREC_CHECK_FINITE
    if (!t.all_finite()) fail_as<NumericError>("non-finite values in ", what);
#else
    (void)t;
    (void)what;
#endif
  }

  static constexpr double kInvSqrt2 = 0.70710678118654752440;
  static constexpr double kInvSqrt2Pi = 0.39894228040143267794;

  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<Record> records_;
};

}  // namespace mdsrec::ad
