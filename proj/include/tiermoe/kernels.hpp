// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include "tiermoe/tensor.hpp"

namespace tiermoe::kernels {

enum class Exec { serial, parallel };

// out = a * b. Both variants accumulate each output element over the inner
// dimension in the same order, so their results are bit-identical.
Tensor2D matmul_serial(const Tensor2D& a, const Tensor2D& b);
Tensor2D matmul_parallel(const Tensor2D& a, const Tensor2D& b);

inline Tensor2D matmul(const Tensor2D& a, const Tensor2D& b, Exec exec) {
  return exec == Exec::parallel ? matmul_parallel(a, b) : matmul_serial(a, b);
}

// x * sigmoid(x), elementwise.
void silu_inplace(Tensor2D& x, Exec exec = Exec::serial);

}  // namespace tiermoe::kernels
