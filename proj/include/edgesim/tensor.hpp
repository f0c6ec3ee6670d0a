/*
 * Copyright 2026 The EdgeSim Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "edgesim/error.hpp"

namespace edgesim {

// Dense row-major matrix of 64-bit floats. Everything on the tape is rank 2;
// a [n] vector is the same thing as [1, n] and both spellings are accepted at
// construction.
class Tensor {
 public:
  Tensor() = default;

  Tensor(int64_t rows, int64_t cols) : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows * cols), 0.0) {
    if (rows < 0 || cols < 0) fail("bad_argument", "negative tensor dimension");
  }

  static Tensor zeros(int64_t rows, int64_t cols) { return Tensor(rows, cols); }

  static Tensor full(int64_t rows, int64_t cols, double v) {
    Tensor t(rows, cols);
    for (double& x : t.data_) x = v;
    return t;
  }

  static Tensor scalar(double v) { return full(1, 1, v); }

  static Tensor row(std::vector<double> values) {
    Tensor t;
    t.rows_ = 1;
    t.cols_ = static_cast<int64_t>(values.size());
    t.data_ = std::move(values);
    return t;
  }

  static Tensor from(int64_t rows, int64_t cols, std::vector<double> values) {
    if (static_cast<int64_t>(values.size()) != rows * cols) {
      fail("shape_mismatch", "tensor init: " + std::to_string(values.size()) + " values for shape " +
                                 shape_str(rows, cols));
    }
    Tensor t;
    t.rows_ = rows;
    t.cols_ = cols;
    t.data_ = std::move(values);
    return t;
  }

  int64_t rows() const { return rows_; }
  int64_t cols() const { return cols_; }
  int64_t size() const { return rows_ * cols_; }
  bool empty() const { return size() == 0; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * cols_ + c)]; }
  double at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * cols_ + c)]; }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  std::string shape_str() const { return shape_str(rows_, cols_); }

  static std::string shape_str(int64_t r, int64_t c) {
    return "[" + std::to_string(r) + ", " + std::to_string(c) + "]";
  }

  const std::vector<double>& values() const { return data_; }

 private:
  int64_t rows_ = 0;
  int64_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace edgesim
