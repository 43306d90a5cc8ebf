// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "tiermoe/kernels.hpp"

#include <cmath>
#include <cstdint>

#include "tiermoe/error.hpp"

namespace tiermoe::kernels {
namespace {

void check_shapes(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols() != b.rows()) {
    throw ConfigError("matmul: inner dimension mismatch (" + std::to_string(a.cols()) + " vs " +
                      std::to_string(b.rows()) + ")");
  }
}

inline void matmul_row(const Tensor2D& a, const Tensor2D& b, Tensor2D& out, std::size_t i) {
  auto dst = out.row(i);
  auto src = a.row(i);
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const float s = src[k];
    auto brow = b.row(k);
    for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += s * brow[j];
  }
}

}  // namespace

Tensor2D matmul_serial(const Tensor2D& a, const Tensor2D& b) {
  check_shapes(a, b);
  Tensor2D out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, out, i);
  return out;
}

Tensor2D matmul_parallel(const Tensor2D& a, const Tensor2D& b) {
  check_shapes(a, b);
  Tensor2D out(a.rows(), b.cols());
  const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) matmul_row(a, b, out, static_cast<std::size_t>(i));
  return out;
}

void silu_inplace(Tensor2D& x, Exec exec) {
  auto d = x.data();
  const auto n = static_cast<std::int64_t>(d.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) d[i] = d[i] / (1.0f + std::exp(-d[i]));
  } else {
    for (std::int64_t i = 0; i < n; ++i) d[i] = d[i] / (1.0f + std::exp(-d[i]));
  }
}

}  // namespace tiermoe::kernels
