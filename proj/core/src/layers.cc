#include "attnie/layers.h"

#include <algorithm>
#include <cmath>

#include "attnie/errors.h"
#include "attnie/features.h"
#include "attnie/ops.h"

namespace attnie {
namespace {

Tensor uniform(Shape shape, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace

AttentionParams AttentionParams::init(std::size_t width, std::size_t heads,
                                      std::mt19937_64& rng) {
  if (heads == 0 || width == 0 || width % heads != 0) {
    throw ConfigError("attention width " + std::to_string(width) +
                      " is not divisible by " + std::to_string(heads) +
                      " heads; pad the input features to a multiple of the "
                      "head count");
  }
  const std::size_t head_width = width / heads;
  const double limit = glorot_limit(width, head_width);
  AttentionParams p;
  for (std::size_t h = 0; h < heads; ++h) {
    p.query_w.push_back(uniform({width, head_width}, limit, rng));
    p.query_b.push_back(Tensor::zeros({head_width}, true));
    p.key_w.push_back(uniform({width, head_width}, limit, rng));
    p.key_b.push_back(Tensor::zeros({head_width}, true));
    p.value_w.push_back(uniform({width, head_width}, limit, rng));
    p.value_b.push_back(Tensor::zeros({head_width}, true));
  }
  p.norm_gain = Tensor::full({width}, 1.0, true);
  p.norm_bias = Tensor::zeros({width}, true);
  return p;
}

void AttentionParams::append_named(const std::string& prefix,
                                   std::vector<NamedTensor>& out) const {
  for (std::size_t h = 0; h < heads(); ++h) {
    const std::string head = prefix + ".head" + std::to_string(h);
    out.push_back({head + ".query.weight", query_w[h]});
    out.push_back({head + ".query.bias", query_b[h]});
    out.push_back({head + ".key.weight", key_w[h]});
    out.push_back({head + ".key.bias", key_b[h]});
    out.push_back({head + ".value.weight", value_w[h]});
    out.push_back({head + ".value.bias", value_b[h]});
  }
  out.push_back({prefix + ".norm.gain", norm_gain});
  out.push_back({prefix + ".norm.bias", norm_bias});
}

AttentionResult multi_head_attention(const Tensor& input,
                                     const AttentionParams& params,
                                     const AttentionOptions& options) {
  if (input.rank() != 2 || input.dim(1) != params.width()) {
    throw DimensionError("attention input " + shape_string(input.shape()) +
                         " does not match width " +
                         std::to_string(params.width()));
  }
  const std::size_t len = input.dim(0);
  if (len == 0) throw EmptyInputError("attention over an empty sequence");
  const std::size_t heads = params.heads();
  const std::size_t width = params.width();
  const std::size_t head_width = width / heads;
  const double scale_by =
      1.0 / std::sqrt(static_cast<double>(options.scale_by_model_width
                                              ? width
                                              : head_width));

  std::vector<Tensor> head_out;
  std::vector<Tensor> head_weights;
  head_out.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor q = relu(add_bias(matmul(input, params.query_w[h]), params.query_b[h]));
    Tensor k = relu(add_bias(matmul(input, params.key_w[h]), params.key_b[h]));
    Tensor v = relu(add_bias(matmul(input, params.value_w[h]), params.value_b[h]));
    Tensor a = softmax(scale(matmul(q, transpose(k)), scale_by), 1);
    head_out.push_back(matmul(a, v));
    if (options.collect_trace) head_weights.push_back(a);
  }
  Tensor joined = heads == 1 ? head_out[0] : concat(head_out);
  Tensor out = layer_norm(add(input, joined), params.norm_gain, params.norm_bias);

  AttentionResult result{out, {}};
  if (options.collect_trace) {
    std::vector<double> w, ho;
    w.reserve(heads * len * len);
    ho.reserve(heads * len * head_width);
    for (std::size_t h = 0; h < heads; ++h) {
      auto wd = head_weights[h].data();
      w.insert(w.end(), wd.begin(), wd.end());
      auto od = head_out[h].data();
      ho.insert(ho.end(), od.begin(), od.end());
    }
    result.trace.weights = Tensor::from({heads, len, len}, std::move(w));
    result.trace.head_outputs =
        Tensor::from({heads, len, head_width}, std::move(ho));
    result.trace.concatenated = joined.detach();
    result.trace.output = out.detach();
  }
  return result;
}

ConvParams ConvParams::init(std::size_t window, std::size_t in_width,
                            std::size_t filters, std::mt19937_64& rng) {
  if (window % 2 == 0) {
    throw ConfigError("convolution window must be odd, got " +
                      std::to_string(window));
  }
  if (filters == 0 || in_width == 0) {
    throw ConfigError("convolution needs positive widths");
  }
  ConvParams p;
  p.kernel = uniform({window, in_width, filters},
                     glorot_limit(window * in_width, window * filters), rng);
  p.bias = Tensor::zeros({filters}, true);
  return p;
}

void ConvParams::append_named(const std::string& prefix,
                              std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".kernel", kernel});
  out.push_back({prefix + ".bias", bias});
}

Tensor conv_relu(const Tensor& input, const ConvParams& params) {
  return relu(conv1d(input, params.kernel, params.bias));
}

Tensor conv_branch(const Tensor& input, const ConvParams& params) {
  return global_max_pool(conv_relu(input, params));
}

}  // namespace attnie
