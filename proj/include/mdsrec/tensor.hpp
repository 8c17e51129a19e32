#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "mdsrec/common.hpp"
#include "mdsrec/rng.hpp"

namespace mdsrec {

// Dense row-major tensor of doubles. Rank 1 and 2 cover everything the model
// needs; batched sequence states are stored flattened as (B*t) x d matrices.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    v_.assign(static_cast<std::size_t>(count(shape_)), 0.0);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<double> values) {
    Tensor t;
    require(count(shape) == static_cast<std::int64_t>(values.size()),
            "Tensor::from: shape ", shape_str(shape), " needs ", count(shape),
            " values, got ", values.size());
    t.shape_ = std::move(shape);
    t.v_ = std::move(values);
    return t;
  }

  static Tensor eye(int n) {
    Tensor t({n, n});
    for (int i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  static Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(shape));
    for (auto& x : t.v_) x = stddev * rng.normal();
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int rows() const { return rank() >= 1 ? shape_[0] : 1; }
  int cols() const { return rank() >= 2 ? shape_[1] : 1; }
  std::int64_t size() const { return static_cast<std::int64_t>(v_.size()); }
  bool empty() const { return v_.empty(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  double& operator[](std::int64_t flat) { return v_[static_cast<std::size_t>(flat)]; }
  double operator[](std::int64_t flat) const { return v_[static_cast<std::size_t>(flat)]; }

  double& operator()(int i) { return v_[static_cast<std::size_t>(i)]; }
  double operator()(int i) const { return v_[static_cast<std::size_t>(i)]; }

  double& operator()(int i, int j) {
    return v_[static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_[1]) +
              static_cast<std::size_t>(j)];
  }
  double operator()(int i, int j) const {
    return v_[static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_[1]) +
              static_cast<std::size_t>(j)];
  }

  void fill(double value) {
    for (auto& x : v_) x = value;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  Tensor& add_inplace(const Tensor& o) {
    require(same_shape(o), "add_inplace: shape mismatch ", shape_str(shape_), " vs ",
            shape_str(o.shape_));
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }

  Tensor& scale_inplace(double c) {
    for (auto& x : v_) x *= c;
    return *this;
  }

  bool all_finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::fabs(x));
    return m;
  }

  std::string shape_string() const { return shape_str(shape_); }

  static std::string shape_str(const std::vector<int>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(s[i]);
    }
    out += ")";
    return out;
  }

  static std::int64_t count(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
      require(d >= 0, "negative dimension in shape ", shape_str(shape));
      n *= d;
    }
    return n;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> v_;
};

inline bool approx_equal(const Tensor& a, const Tensor& b, double tol) {
  if (!a.same_shape(b)) return false;
  for (std::int64_t i = 0; i < a.size(); ++i)
    if (std::fabs(a[i] - b[i]) > tol) return false;
  return true;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::int64_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

// out = A * B, accumulating along k in index order (deterministic).
inline void matmul_into(Tensor& out, const Tensor& A, const Tensor& B) {
  const int m = A.dim(0), k = A.dim(1), n = B.dim(1);
  for (int i = 0; i < m; ++i) {
    double* orow = out.data() + static_cast<std::int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double a = A(i, p);
      if (a == 0.0) continue;
      const double* brow = B.data() + static_cast<std::int64_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += a * brow[j];
    }
  }
}

}  // namespace mdsrec
