#pragma once

#include <cstdint>
#include <random>
#include <utility>

#include "triax/tensor.hpp"

namespace triax {

/// Additive score for disallowed attention positions. Kept finite so that
/// masked rows never produce inf - inf.
inline constexpr double kMaskedScore = -1e9;

using Rng = std::mt19937_64;

Tensor matmul(const Tensor& a, const Tensor& b);

struct MatmulGrads {
  Tensor a;
  Tensor b;
};

/// Reverse pass of c = a*b given dL/dc: returns dL/da = g*b^T and dL/db = a^T*g.
MatmulGrads matmul_backward(const Tensor& a, const Tensor& b, const Tensor& grad_out);

Tensor transpose(const Tensor& m);

/// Softmax over the last axis with an optional additive mask.
///
/// The mask either has the same shape as x or the same trailing extents, in
/// which case it is broadcast over the leading axes. A slice whose mask entries
/// are all at or below half the masked sentinel is rejected with
/// "fully masked attention row".
Tensor softmax_lastdim(const Tensor& x, const Tensor* additive_mask = nullptr);

/// dL/dx for y = softmax_lastdim(x, mask), given y and dL/dy.
Tensor softmax_lastdim_backward(const Tensor& y, const Tensor& grad_out);

struct DropoutResult {
  Tensor output;
  Tensor scale;  // per-element multiplier: 0 or 1/(1-rate); the reverse pass is grad * scale
};

/// Inverted dropout. Identity (scale all ones) when training is false.
DropoutResult dropout(const Tensor& x, double rate, bool training, Rng& rng);

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Seeded uniform fill in [lo, hi).
void fill_uniform(Tensor& t, double lo, double hi, Rng& rng);

}  // namespace triax
