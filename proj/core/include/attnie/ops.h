#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "attnie/tensor.h"

namespace attnie {

// Differentiable operations. Every function validates shapes and throws
// DimensionError (or ConfigError / EmptyInputError where noted) naming the
// offending shapes.

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// [m,n] -> [n,m]
Tensor transpose(const Tensor& a);

// Pointwise arithmetic: identical shapes, or one operand holding one value.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// x[..., n] + bias[n], broadcast over all leading axes.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// Normalizes every slice along `axis` with max subtraction.
Tensor softmax(const Tensor& x, std::size_t axis);

// Normalizes the last axis to zero mean and unit variance, then applies
// gain and bias. `epsilon` sits inside the square root.
inline constexpr double kLayerNormEpsilon = 1e-5;
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double epsilon = kLayerNormEpsilon);

// Same-length 1D convolution with symmetric zero padding of (w-1)/2.
// x[I,f_in], kernel[w,f_in,f_out], bias[f_out] -> [I,f_out].
// Even widths raise ConfigError.
Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias);

// Per-channel maximum over the sequence axis: [I,f] -> [f]. The gradient
// goes to the first (lowest-index) maximum. I == 0 raises EmptyInputError.
Tensor global_max_pool(const Tensor& x);

// Embedding lookup: table[V,dim] -> [indices.size(), dim]. Rows equal to
// `padding_index` come out as zeros and never receive gradient.
// Out-of-range indices raise EncodingError.
Tensor gather_rows(const Tensor& table, std::span<const std::int64_t> indices,
                   std::int64_t padding_index = 0);

// Concatenates along the last axis. All parts share the leading extents.
Tensor concat(const std::vector<Tensor>& parts);
// Columns [begin, end) of a rank-2 tensor.
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Inverted dropout: zeroes each element with probability `rate` and
// rescales survivors by 1/(1-rate).
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng);

}  // namespace attnie
