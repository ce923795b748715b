#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "attnie/checkpoint.h"
#include "attnie/tensor.h"

namespace attnie {

// Per-head affine projections R^d -> R^{d/H} for query, key and value, plus
// the LayerNorm applied after the residual connection.
struct AttentionParams {
  std::vector<Tensor> query_w, query_b;
  std::vector<Tensor> key_w, key_b;
  std::vector<Tensor> value_w, value_b;
  Tensor norm_gain, norm_bias;

  std::size_t heads() const { return query_w.size(); }
  std::size_t width() const { return norm_gain.dim(0); }

  // Glorot-uniform weights, zero biases, unit gain. Throws ConfigError when
  // `heads` does not divide `width`.
  static AttentionParams init(std::size_t width, std::size_t heads,
                              std::mt19937_64& rng);

  void append_named(const std::string& prefix,
                    std::vector<NamedTensor>& out) const;
};

// Everything one attention block computed, detached from the graph.
struct AttentionTrace {
  Tensor weights;       // [H, I, I]; every row sums to one
  Tensor head_outputs;  // [H, I, d/H]
  Tensor concatenated;  // [I, d]
  Tensor output;        // [I, d], after residual and LayerNorm
};

struct AttentionResult {
  Tensor output;  // [I, d]
  AttentionTrace trace;
};

struct AttentionOptions {
  // Divide scores by sqrt(d) of the full model width; sqrt(d/H) otherwise.
  bool scale_by_model_width = true;
  bool collect_trace = true;
};

// Multi-head scaled dot-product self-attention with ReLU projections, a
// residual connection and LayerNorm:
//   a^h = softmax_j(q_i^h . k_j^h / sqrt(d)),  o_i^h = sum_j a_ij^h v_j^h,
//   m_i = LN(e_i + [o_i^1; ...; o_i^H]).
AttentionResult multi_head_attention(const Tensor& input,
                                     const AttentionParams& params,
                                     const AttentionOptions& options = {});

struct ConvParams {
  Tensor kernel;  // [w, f_in, f_out]
  Tensor bias;    // [f_out]

  std::size_t window() const { return kernel.dim(0); }
  std::size_t filters() const { return kernel.dim(2); }

  static ConvParams init(std::size_t window, std::size_t in_width,
                         std::size_t filters, std::mt19937_64& rng);
  void append_named(const std::string& prefix,
                    std::vector<NamedTensor>& out) const;
};

// ReLU(conv1d(x)) over the whole sequence: [I, f_in] -> [I, f].
Tensor conv_relu(const Tensor& input, const ConvParams& params);

// conv1d -> ReLU -> global max pool: [I, f_in] -> [f].
Tensor conv_branch(const Tensor& input, const ConvParams& params);

}  // namespace attnie
