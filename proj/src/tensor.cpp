// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "tiermoe/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tiermoe/error.hpp"

namespace tiermoe {

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {
  if (cols == 0) throw ConfigError("Tensor2D: cols must be >= 1");
}

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (cols == 0) throw ConfigError("Tensor2D: cols must be >= 1");
  if (data_.size() != rows * cols) {
    throw ConfigError("Tensor2D: data length " + std::to_string(data_.size()) + " != " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Tensor2D Tensor2D::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) throw ConfigError("Tensor2D::slice_rows: range out of bounds");
  std::vector<float> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                         data_.begin() + static_cast<std::ptrdiff_t>(end * cols_));
  return {end - begin, cols_, std::move(out)};
}

bool Tensor2D::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor2D concat_rows(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols() != b.cols()) throw ConfigError("concat_rows: column mismatch");
  std::vector<float> out(a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  return {a.rows() + b.rows(), a.cols(), std::move(out)};
}

double max_relative_error(const Tensor2D& actual, const Tensor2D& expected) {
  if (actual.rows() != expected.rows() || actual.cols() != expected.cols()) {
    throw ConfigError("max_relative_error: shape mismatch");
  }
  double diff = 0.0;
  double scale = 0.0;
  auto a = actual.data();
  auto e = expected.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(static_cast<double>(a[i]) - e[i]));
    scale = std::max(scale, std::abs(static_cast<double>(e[i])));
  }
  return diff / std::max(scale, 1e-30);
}

}  // namespace tiermoe
