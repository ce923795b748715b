#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "attnie/errors.h"
#include "attnie/layers.h"
#include "attnie/model.h"
#include "attnie/ops.h"
#include "test_util.h"

namespace attnie {
namespace {

using testing::random_tensor;
using testing::values;

AttentionParams random_attention(std::size_t width, std::size_t heads, std::mt19937_64& rng) {
  AttentionParams p = AttentionParams::init(width, heads, rng);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  for (auto* group : {&p.query_b, &p.key_b, &p.value_b}) {
    for (Tensor& b : *group) {
      for (double& x : b.mutable_data()) x = d(rng);
    }
  }
  return p;
}

// Explicit loops over the attention terms, independent of the tensor ops.
std::vector<double> reference_heads(const Tensor& e, const AttentionParams& p) {
  const std::size_t len = e.dim(0), d = e.dim(1), heads = p.heads(), hw = d / heads;
  auto project = [&](const Tensor& w, const Tensor& b) {
    std::vector<double> out(len * hw);
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t o = 0; o < hw; ++o) {
        double acc = 0;
        for (std::size_t c = 0; c < d; ++c) acc += e.at(i, c) * w.at(c, o);
        out[i * hw + o] = std::max(0.0, acc + b[o]);
      }
    }
    return out;
  };
  std::vector<double> result(heads * len * hw);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto q = project(p.query_w[h], p.query_b[h]);
    const auto k = project(p.key_w[h], p.key_b[h]);
    const auto v = project(p.value_w[h], p.value_b[h]);
    for (std::size_t i = 0; i < len; ++i) {
      std::vector<double> s(len);
      for (std::size_t j = 0; j < len; ++j) {
        double dot = 0;
        for (std::size_t o = 0; o < hw; ++o) dot += q[i * hw + o] * k[j * hw + o];
        s[j] = dot / std::sqrt(static_cast<double>(d));
      }
      const double top = *std::max_element(s.begin(), s.end());
      double z = 0;
      for (double& x : s) z += (x = std::exp(x - top));
      for (std::size_t o = 0; o < hw; ++o) {
        double acc = 0;
        for (std::size_t j = 0; j < len; ++j) acc += s[j] / z * v[j * hw + o];
        result[(h * len + i) * hw + o] = acc;
      }
    }
  }
  return result;
}

TEST(Attention, SingleTokenAttendsToItself) {
  std::mt19937_64 rng(1);
  const auto p = random_attention(8, 4, rng);
  const auto r = multi_head_attention(random_tensor(rng, {1, 8}), p);
  ASSERT_EQ(r.trace.weights.shape(), (Shape{4, 1, 1}));
  for (double w : r.trace.weights.data()) EXPECT_EQ(w, 1.0);
}

TEST(Attention, IdenticalRowsGiveIdenticalOutputs) {
  std::mt19937_64 rng(2);
  const auto p = random_attention(6, 3, rng);
  const auto row = testing::random_values(rng, 6);
  std::vector<double> e;
  for (int i = 0; i < 4; ++i) e.insert(e.end(), row.begin(), row.end());
  const auto r = multi_head_attention(Tensor::from({4, 6}, e), p);
  for (const Tensor* t : {&r.trace.concatenated, &r.output}) {
    for (std::size_t i = 1; i < 4; ++i) {
      for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(t->at(i, c), t->at(0, c));
    }
  }
}

TEST(Attention, MatchesReferenceLoops) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_attention(8, 2, rng);
    const Tensor e = random_tensor(rng, {5, 8});
    const auto r = multi_head_attention(e, p);
    const auto expect = reference_heads(e, p);
    const auto got = values(r.trace.head_outputs);
    ASSERT_EQ(got.size(), expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-10);
    // The concatenation is the heads side by side.
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t c = 0; c < 8; ++c) {
        EXPECT_EQ(r.trace.concatenated.at(i, c),
                  r.trace.head_outputs[((c / 4) * 5 + i) * 4 + c % 4]);
      }
    }
  }
}

TEST(Attention, RowsSumToOne) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t heads = 1 + rng() % 4, len = 1 + rng() % 9;
    const auto p = random_attention(heads * (1 + rng() % 3), heads, rng);
    const auto r = multi_head_attention(random_tensor(rng, {len, p.width()}, false), p);
    for (std::size_t row = 0; row < heads * len; ++row) {
      double s = 0;
      for (std::size_t j = 0; j < len; ++j) s += r.trace.weights[row * len + j];
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Attention, HeadsMustDivideWidth) {
  std::mt19937_64 rng(5);
  EXPECT_THROW(AttentionParams::init(10, 4, rng), ConfigError);
}

TEST(Attention, PermutationEquivariant) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t len = 2 + rng() % 6;
    const auto p = random_attention(8, 2, rng);
    const Tensor e = random_tensor(rng, {len, 8});
    std::vector<std::size_t> perm(len);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pe;
    for (std::size_t i : perm) {
      for (std::size_t c = 0; c < 8; ++c) pe.push_back(e.at(i, c));
    }
    const Tensor a = multi_head_attention(e, p).output;
    const Tensor b = multi_head_attention(Tensor::from({len, 8}, pe), p).output;
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(b.at(i, c), a.at(perm[i], c), 1e-12);
    }
  }
}

TEST(ConvBranch, ZeroInputZeroBias) {
  std::mt19937_64 rng(7);
  ConvParams p = ConvParams::init(3, 4, 5, rng);
  const Tensor y = conv_branch(Tensor::zeros({6, 4}), p);
  EXPECT_EQ(y.shape(), (Shape{5}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(ConvBranch, IdentityKernelIsMaxOfRelu) {
  std::mt19937_64 rng(8);
  ConvParams p{Tensor::zeros({1, 3, 3}, true), Tensor::zeros({3}, true)};
  for (std::size_t c = 0; c < 3; ++c) p.kernel.mutable_data()[c * 3 + c] = 1.0;
  const Tensor x = random_tensor(rng, {5, 3});
  const Tensor y = conv_branch(x, p);
  for (std::size_t c = 0; c < 3; ++c) {
    double best = 0;
    for (std::size_t i = 0; i < 5; ++i) best = std::max(best, x.at(i, c));
    EXPECT_EQ(y[c], best);
  }
}

TEST(ConvBranch, ComposesPrimitives) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    ConvParams p = ConvParams::init(2 * (rng() % 3) + 1, 4, 6, rng);
    const Tensor x = random_tensor(rng, {7, 4});
    EXPECT_EQ(values(conv_branch(x, p)), values(global_max_pool(relu(conv1d(x, p.kernel, p.bias)))));
  }
}

ArchitectureConfig arch_of(Variant v, std::size_t filters = 64, std::size_t heads = 8) {
  ArchitectureConfig a;
  a.variant = v;
  a.filters = filters;
  a.heads = heads;
  return a;
}

std::size_t attention_blocks(const Network& net) {
  std::size_t n = 0;
  for (const Lane& l : net.lanes()) n += l.attention.has_value();
  return n;
}

TEST(BuildModel, PooledWidths) {
  EXPECT_EQ(build_model(arch_of(Variant::kFourMhaFourCnn), 64, 3, 1).pooled_width(), 256u);
  EXPECT_EQ(build_model(arch_of(Variant::kFourCnnFourMha), 64, 3, 1).pooled_width(), 256u);
  EXPECT_EQ(build_model(arch_of(Variant::kFourCnn), 64, 3, 1).pooled_width(), 256u);
  EXPECT_EQ(build_model(arch_of(Variant::kFourMha), 64, 3, 1).pooled_width(), 256u);

  const Network cnn = build_model(arch_of(Variant::kFourCnn), 64, 3, 1);
  EXPECT_EQ(attention_blocks(cnn), 0u);

  const Network one = build_model(arch_of(Variant::kOneMha), 64, 3, 1);
  EXPECT_EQ(attention_blocks(one), 1u);
  EXPECT_EQ(one.pooled_width(), 64u);
  EXPECT_EQ(one.label_count(), 3u);
}

TEST(BuildModel, HeadsMustDivideInput) {
  EXPECT_THROW(build_model(arch_of(Variant::kFourMha), 30, 2, 1), ConfigError);
  EXPECT_NO_THROW(build_model(arch_of(Variant::kFourCnn), 30, 2, 1));
}

TEST(ArchitectureConfig, Validation) {
  ArchitectureConfig a;
  a.widths = {1, 4};
  EXPECT_THROW(a.validate(), ConfigError);
  a.widths = {3, 1};
  EXPECT_THROW(a.validate(), ConfigError);
  a.widths = {1, 3};
  a.filters = 0;
  EXPECT_THROW(a.validate(), ConfigError);
  EXPECT_EQ(parse_variant("4mha-4cnn"), Variant::kFourMhaFourCnn);
  for (Variant v : all_variants()) EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_THROW(parse_variant("5mha"), ConfigError);
}

TEST(Network, ConfidencesInOpenInterval) {
  std::mt19937_64 rng(10);
  for (Variant v : all_variants()) {
    const Network net = build_model(arch_of(v, 8, 2), 8, 4, 3);
    for (int trial = 0; trial < 10; ++trial) {
      const auto out = net.forward(random_tensor(rng, {1 + rng() % 6, 8}), false, nullptr, true);
      for (double c : out.confidences.data()) {
        EXPECT_GT(c, 0.0);
        EXPECT_LT(c, 1.0);
      }
      EXPECT_EQ(out.traces.size(), attention_blocks(net)) << variant_name(v);
    }
  }
}

TEST(Network, EvalModeIsDeterministic) {
  std::mt19937_64 rng(11);
  const Network net = build_model(arch_of(Variant::kFourMhaFourCnn, 8, 2), 8, 2, 3);
  const Tensor x = random_tensor(rng, {5, 8});
  EXPECT_EQ(values(net.forward(x, false, nullptr, false).confidences),
            values(net.forward(x, false, nullptr, false).confidences));
}

TEST(Network, TrainModeNeedsGenerator) {
  const Network net = build_model(arch_of(Variant::kFourCnn, 4, 1), 4, 2, 3);
  EXPECT_THROW(net.forward(Tensor::zeros({3, 4}), true, nullptr, false), ContractError);
}

TEST(Network, ZeroOutputLayerGivesHalf) {
  std::mt19937_64 rng(12);
  Network net = build_model(arch_of(Variant::kFourMhaFourCnn, 8, 2), 8, 3, 3);
  for (double& w : net.output_weight().mutable_data()) w = 0;
  for (double& b : net.output_bias().mutable_data()) b = 0;
  const auto out = net.forward(random_tensor(rng, {4, 8}), false, nullptr, false);
  for (double c : out.confidences.data()) EXPECT_EQ(c, 0.5);
}

TEST(Network, PureAttentionPoolIsPermutationInvariant) {
  std::mt19937_64 rng(13);
  for (Variant v : {Variant::kFourMha, Variant::kOneMha}) {
    const Network net = build_model(arch_of(v, 8, 2), 8, 2, 5);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t len = 2 + rng() % 6;
      const Tensor x = random_tensor(rng, {len, 8});
      std::vector<std::size_t> perm(len);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<double> px;
      for (std::size_t i : perm) {
        for (std::size_t c = 0; c < 8; ++c) px.push_back(x.at(i, c));
      }
      const auto a = net.forward(x, false, nullptr, false);
      const auto b = net.forward(Tensor::from({len, 8}, px), false, nullptr, false);
      for (std::size_t k = 0; k < a.pooled.size(); ++k) EXPECT_NEAR(a.pooled[k], b.pooled[k], 1e-12);
      for (std::size_t l = 0; l < a.lane_sequences.size(); ++l) {
        for (std::size_t i = 0; i < len; ++i) {
          for (std::size_t c = 0; c < 8; ++c) {
            EXPECT_NEAR(b.lane_sequences[l].at(i, c), a.lane_sequences[l].at(perm[i], c), 1e-12);
          }
        }
      }
    }
  }
}

TEST(Network, ConvLaneReceptiveField) {
  std::mt19937_64 rng(14);
  const Network net = build_model(arch_of(Variant::kFourCnn, 4, 1), 3, 2, 7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t len = 4 + rng() % 10, j = rng() % len;
    const Tensor x = random_tensor(rng, {len, 3});
    Tensor y = x.clone();
    for (std::size_t c = 0; c < 3; ++c) y.mutable_data()[j * 3 + c] += 0.7;
    const auto a = net.forward(x, false, nullptr, false);
    const auto b = net.forward(y, false, nullptr, false);
    for (std::size_t l = 0; l < net.lanes().size(); ++l) {
      const std::size_t half = (net.arch().widths[l] - 1) / 2;
      for (std::size_t i = 0; i < len; ++i) {
        if ((i > j ? i - j : j - i) <= half) continue;
        for (std::size_t f = 0; f < 4; ++f) {
          EXPECT_EQ(a.lane_sequences[l].at(i, f), b.lane_sequences[l].at(i, f));
        }
      }
    }
  }
}

TEST(Network, IdenticalAttentionLanesRepeatOneLane) {
  std::mt19937_64 rng(15);
  const Network one = build_model(arch_of(Variant::kOneMha, 8, 2), 8, 2, 21);
  Network four = build_model(arch_of(Variant::kFourMha, 8, 2), 8, 2, 22);
  for (Lane& lane : four.mutable_lanes()) {
    const AttentionParams& src = *one.lanes()[0].attention;
    std::vector<NamedTensor> from, to;
    src.append_named("a", from);
    lane.attention->append_named("a", to);
    for (std::size_t k = 0; k < from.size(); ++k) {
      std::copy(from[k].tensor.data().begin(), from[k].tensor.data().end(),
                to[k].tensor.mutable_data().begin());
    }
  }
  const Tensor x = random_tensor(rng, {5, 8});
  const auto p1 = values(one.forward(x, false, nullptr, false).pooled);
  const auto p4 = values(four.forward(x, false, nullptr, false).pooled);
  ASSERT_EQ(p4.size(), 4 * p1.size());
  for (std::size_t k = 0; k < p4.size(); ++k) EXPECT_EQ(p4[k], p1[k % p1.size()]);
}

TEST(Model, EmbeddingWidthPaddedToHeads) {
  ModelConfig mc;
  mc.arch = arch_of(Variant::kFourMha, 8, 8);
  mc.features.word_dim = 10;
  mc.labels = {"A"};
  Vocab vocab;
  vocab.add("x");
  const Model m = Model::build(mc, vocab);
  EXPECT_EQ(m.input_width(), padded_width(mc.features.feature_width(), 8));
  EXPECT_EQ(m.input_width() % 8, 0u);
}

TEST(Model, OutOfRangeIndexIsEncodingError) {
  ModelConfig mc;
  mc.arch = arch_of(Variant::kFourCnn, 4, 1);
  mc.features.word_dim = 4;
  mc.labels = {"A", "B"};
  Vocab vocab;
  vocab.add("x");
  const Model m = Model::build(mc, vocab);
  EncodedExample ex;
  ex.tokens = {2, 99};
  ex.roles = {1, 1};
  ex.distances = {{1, 1}, {1, 1}};
  EXPECT_THROW(m.forward(ex, false), EncodingError);
}

}  // namespace
}  // namespace attnie
