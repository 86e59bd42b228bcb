// stwb/tensor.hpp

// Copyright 2026  The STWB Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef STWB_TENSOR_HPP_
#define STWB_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "stwb/common.hpp"
#include "stwb/rng.hpp"

namespace stwb {

// Dense row-major double tensor. Rank is 1 or 2 everywhere in this codebase;
// 2-D accessors assume rank 2.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols, double fill = 0.0)
      : shape_{rows, cols},
        data_(static_cast<size_t>(rows) * static_cast<size_t>(cols), fill) {}
  explicit Tensor(std::vector<int> shape, double fill = 0.0) : shape_(std::move(shape)) {
    size_t n = 1;
    for (int d : shape_) n *= static_cast<size_t>(d);
    data_.assign(n, fill);
  }

  static Tensor row(const std::vector<double>& v) {
    Tensor t(1, static_cast<int>(v.size()));
    t.data_ = v;
    return t;
  }

  int ndim() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int rows() const { return shape_.empty() ? 0 : shape_[0]; }
  int cols() const { return shape_.size() < 2 ? (shape_.empty() ? 0 : 1) : shape_[1]; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols() + c]; }
  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  const double* row_ptr(int r) const { return data_.data() + static_cast<size_t>(r) * cols(); }
  double* row_ptr(int r) { return data_.data() + static_cast<size_t>(r) * cols(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { data_.assign(data_.size(), v); }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

// out = op(a, b) with optional transposes; shapes are validated.
inline Tensor matmul_raw(const Tensor& a, const Tensor& b, bool ta = false,
                         bool tb = false) {
  int m = ta ? a.cols() : a.rows();
  int k = ta ? a.rows() : a.cols();
  int k2 = tb ? b.cols() : b.rows();
  int n = tb ? b.rows() : b.cols();
  require_data(k == k2, "matmul shape mismatch " + a.shape_str() + " x " + b.shape_str());
  Tensor out(m, n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      double av = ta ? a.at(p, i) : a.at(i, p);
      if (av == 0.0) continue;
      const int bcols = b.cols();
      double* orow = out.row_ptr(i);
      if (!tb) {
        const double* brow = b.row_ptr(p);
        (void)bcols;
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
      } else {
        for (int j = 0; j < n; ++j) orow[j] += av * b.at(j, p);
      }
    }
  }
  return out;
}

inline void axpy(double alpha, const Tensor& x, Tensor* y) {
  require_data(x.size() == y->size(), "axpy size mismatch");
  const double* xs = x.data();
  double* ys = y->data();
  for (size_t i = 0; i < x.size(); ++i) ys[i] += alpha * xs[i];
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_data(a.size() == b.size(), "max_abs_diff size mismatch");
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline Tensor random_uniform(int rows, int cols, double lo, double hi, Rng* rng) {
  Tensor t(rows, cols);
  for (size_t i = 0; i < t.size(); ++i) t[i] = rng->uniform(lo, hi);
  return t;
}

}  // namespace stwb

#endif  // STWB_TENSOR_HPP_
