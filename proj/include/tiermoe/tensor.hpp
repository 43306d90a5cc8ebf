// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tiermoe {

// Row-major 2-D float tensor. A tensor may have zero rows (an empty token
// batch) but always has at least one column.
class Tensor2D {
 public:
  Tensor2D() = default;
  Tensor2D(std::size_t rows, std::size_t cols);
  Tensor2D(std::size_t rows, std::size_t cols, std::vector<float> data);

  static Tensor2D zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return rows_ == 0; }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  // Rows [begin, end) as a new tensor.
  Tensor2D slice_rows(std::size_t begin, std::size_t end) const;

  bool all_finite() const;

  friend bool operator==(const Tensor2D&, const Tensor2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 1;
  std::vector<float> data_;
};

// Row-wise concatenation; column counts must agree.
Tensor2D concat_rows(const Tensor2D& a, const Tensor2D& b);

// Inf-norm relative error: max|a - b| / max(max|b|, 1e-30).
double max_relative_error(const Tensor2D& actual, const Tensor2D& expected);

}  // namespace tiermoe
