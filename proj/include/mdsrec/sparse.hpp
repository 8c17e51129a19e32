#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <tuple>
#include <vector>

#include "mdsrec/common.hpp"
#include "mdsrec/tensor.hpp"

namespace mdsrec {

// Compressed-row sparse matrix: per row, (col, value) pairs sorted by column,
// no duplicates, all values finite.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int n_rows, int n_cols) : n_rows_(n_rows), n_cols_(n_cols) {
    indptr_.assign(static_cast<std::size_t>(n_rows) + 1, 0);
  }

  // Duplicated (row, col) entries are summed; exact zeros are kept out.
  static SparseMatrix from_triplets(int n_rows, int n_cols,
                                    std::vector<std::tuple<int, int, double>> triplets) {
    SparseMatrix m(n_rows, n_cols);
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
      return std::get<1>(a) < std::get<1>(b);
    });
    m.cols_.reserve(triplets.size());
    m.vals_.reserve(triplets.size());
    std::size_t i = 0;
    while (i < triplets.size()) {
      const int r = std::get<0>(triplets[i]);
      const int c = std::get<1>(triplets[i]);
      require(r >= 0 && r < n_rows && c >= 0 && c < n_cols, "sparse triplet (", r, ", ", c,
              ") outside ", n_rows, "x", n_cols);
      double v = 0.0;
      while (i < triplets.size() && std::get<0>(triplets[i]) == r &&
             std::get<1>(triplets[i]) == c) {
        v += std::get<2>(triplets[i]);
        ++i;
      }
      require(std::isfinite(v), "sparse entry (", r, ", ", c, ") is not finite");
      if (v != 0.0) {
        m.cols_.push_back(c);
        m.vals_.push_back(v);
        ++m.indptr_[static_cast<std::size_t>(r) + 1];
      }
    }
    for (std::size_t r = 0; r < static_cast<std::size_t>(n_rows); ++r)
      m.indptr_[r + 1] += m.indptr_[r];
    return m;
  }

  int rows() const { return n_rows_; }
  int cols() const { return n_cols_; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(vals_.size()); }

  std::size_t row_begin(int r) const { return indptr_[static_cast<std::size_t>(r)]; }
  std::size_t row_end(int r) const { return indptr_[static_cast<std::size_t>(r) + 1]; }
  int entry_col(std::size_t i) const { return cols_[i]; }
  double entry_val(std::size_t i) const { return vals_[i]; }

  double get(int r, int c) const {
    for (std::size_t i = row_begin(r); i < row_end(r); ++i)
      if (cols_[i] == c) return vals_[i];
    return 0.0;
  }

  Tensor to_dense() const {
    Tensor d({n_rows_, n_cols_});
    for (int r = 0; r < n_rows_; ++r)
      for (std::size_t i = row_begin(r); i < row_end(r); ++i) d(r, cols_[i]) = vals_[i];
    return d;
  }

  // out = S * D
  Tensor multiply_dense(const Tensor& d) const {
    require(d.rank() == 2 && d.dim(0) == n_cols_, "spmm: ", n_rows_, "x", n_cols_,
            " sparse times dense ", d.shape_string());
    const int k = d.dim(1);
    Tensor out({n_rows_, k});
    for (int r = 0; r < n_rows_; ++r) {
      double* orow = out.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(k);
      for (std::size_t i = row_begin(r); i < row_end(r); ++i) {
        const double v = vals_[i];
        const double* drow =
            d.data() + static_cast<std::size_t>(cols_[i]) * static_cast<std::size_t>(k);
        for (int j = 0; j < k; ++j) orow[j] += v * drow[j];
      }
    }
    return out;
  }

  // Transpose is cached: graph adjacencies are reused every training step and
  // the backward pass of spmm needs S^T.
  const SparseMatrix& transposed() const {
    if (!transpose_) {
      auto t = std::make_unique<SparseMatrix>(n_cols_, n_rows_);
      std::vector<std::tuple<int, int, double>> trip;
      trip.reserve(vals_.size());
      for (int r = 0; r < n_rows_; ++r)
        for (std::size_t i = row_begin(r); i < row_end(r); ++i)
          trip.emplace_back(cols_[i], r, vals_[i]);
      *t = from_triplets(n_cols_, n_rows_, std::move(trip));
      transpose_ = std::move(t);
    }
    return *transpose_;
  }

  bool is_symmetric() const {
    if (n_rows_ != n_cols_) return false;
    const SparseMatrix& t = transposed();
    if (t.nnz() != nnz()) return false;
    for (int r = 0; r < n_rows_; ++r) {
      if (t.row_begin(r) != row_begin(r) || t.row_end(r) != row_end(r)) return false;
      for (std::size_t i = row_begin(r); i < row_end(r); ++i)
        if (t.cols_[i] != cols_[i] || t.vals_[i] != vals_[i]) return false;
    }
    return true;
  }

  // Each nonempty row scaled to sum 1.
  SparseMatrix row_normalized() const {
    SparseMatrix m(*this);
    for (int r = 0; r < n_rows_; ++r) {
      double sum = 0.0;
      for (std::size_t i = row_begin(r); i < row_end(r); ++i) sum += vals_[i];
      if (sum == 0.0) continue;
      for (std::size_t i = row_begin(r); i < row_end(r); ++i) m.vals_[i] /= sum;
    }
    return m;
  }

  SparseMatrix(const SparseMatrix& o)
      : n_rows_(o.n_rows_), n_cols_(o.n_cols_), indptr_(o.indptr_), cols_(o.cols_),
        vals_(o.vals_) {}
  SparseMatrix& operator=(const SparseMatrix& o) {
    n_rows_ = o.n_rows_;
    n_cols_ = o.n_cols_;
    indptr_ = o.indptr_;
    cols_ = o.cols_;
    vals_ = o.vals_;
    transpose_.reset();
    return *this;
  }
  SparseMatrix(SparseMatrix&&) = default;
  SparseMatrix& operator=(SparseMatrix&&) = default;

 private:
  int n_rows_ = 0;
  int n_cols_ = 0;
  std::vector<std::size_t> indptr_ = {0};
  std::vector<int> cols_;
  std::vector<double> vals_;
  mutable std::unique_ptr<SparseMatrix> transpose_;
};

}  // namespace mdsrec
