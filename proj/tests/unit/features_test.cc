#include <algorithm>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "attnie/errors.h"
#include "attnie/features.h"
#include "test_util.h"

namespace attnie {
namespace {

std::vector<std::string> words(std::size_t n) {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < n; ++i) w.push_back("w" + std::to_string(i % 7));
  return w;
}

TEST(Vocab, MinCountFilters) {
  const Vocab v = build_vocab({{"a", "a", "b"}}, 2);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_FALSE(v.contains("b"));
  EXPECT_EQ(v.index("b"), Vocab::kUnknown);
  EXPECT_EQ(v.index("a"), 2);
}

TEST(Vocab, EveryTokenAtMinCountOne) {
  const Vocab v = build_vocab({{"a", "a", "b"}, {"c"}}, 1);
  EXPECT_EQ(v.size(), 5u);
  for (const char* t : {"a", "b", "c"}) EXPECT_TRUE(v.contains(t));
}

TEST(Vocab, OrderedByCountThenText) {
  const std::vector<std::vector<std::string>> corpus{{"z", "b", "a", "z", "b"}, {"c"}};
  const Vocab v = build_vocab(corpus, 1);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{v.token(0), v.token(1), "b", "z", "a", "c"}));
  EXPECT_EQ(build_vocab(corpus, 1).tokens(), v.tokens());
  const Vocab back = Vocab::from_tokens(v.tokens());
  for (const auto& t : v.tokens()) EXPECT_EQ(back.index(t), v.index(t));
}

TEST(Vocab, IndicesDense) {
  const Vocab v = build_vocab({{"x", "y", "z"}}, 1);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(v.index(v.token(static_cast<std::int64_t>(i))), static_cast<std::int64_t>(i));
  }
}

TEST(Vocab, EmptyCorpus) {
  EXPECT_THROW(build_vocab({}, 1), IngestionError);
}

TEST(WordVectors, ParsesHeaderAndRows) {
  std::istringstream in("2 3\nfoo 1 2 3\nbar 0.5 -1 2e-1\n");
  const WordVectors wv = parse_word2vec(in);
  EXPECT_EQ(wv.dim, 3u);
  EXPECT_EQ(wv.tokens, (std::vector<std::string>{"foo", "bar"}));
  EXPECT_EQ(wv.values, (std::vector<double>{1, 2, 3, 0.5, -1, 0.2}));

  Vocab vocab;
  vocab.add("bar");
  vocab.add("baz");
  const EmbeddingTable t = make_word_table(vocab, 3, 9, &wv);
  EXPECT_EQ(t.dim(), 3u);
  EXPECT_FALSE(t.trainable);
  EXPECT_EQ(t.weights.at(2, 1), -1.0);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(t.weights.at(0, c), 0.0);
  const auto fb = fallback_vector("baz", 3, 9);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(t.weights.at(3, c), fb[c]);
}

TEST(WordVectors, ShortLineReportsLine) {
  std::istringstream in("2 3\nfoo 1 2 3\nbar 1 2\n");
  try {
    parse_word2vec(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find('3'), std::string::npos);
  }
  std::istringstream bad_value("1 2\nfoo 1 x\n");
  EXPECT_THROW(parse_word2vec(bad_value), ParseError);
  std::istringstream bad_header("two 3\n");
  EXPECT_THROW(parse_word2vec(bad_header), ParseError);
}

TEST(WordVectors, FallbackIsSeeded) {
  EXPECT_EQ(fallback_vector("gene", 16, 3), fallback_vector("gene", 16, 3));
  EXPECT_NE(fallback_vector("gene", 16, 3), fallback_vector("gene", 16, 4));
  EXPECT_NE(fallback_vector("gene", 16, 3), fallback_vector("genes", 16, 3));
}

TEST(Encode, DistancesAroundAnchor) {
  Vocab vocab;
  FeatureConfig fc;
  fc.max_distance = 10;
  fc.distance_anchors = 1;
  const auto w = words(7);
  const Anchor anchor{3, 4, Role::kEntity1};
  const EncodedExample ex = encode_example(w, {&anchor, 1}, {1.0}, vocab, fc);
  ASSERT_EQ(ex.distances.size(), 1u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(ex.distances[0][i], static_cast<std::int64_t>(i) - 3 + 11);
    EXPECT_EQ(ex.roles[i], role_index(i == 3 ? Role::kEntity1 : Role::kNone));
  }
  EXPECT_EQ(ex.anchor_offsets, (std::vector<std::size_t>{3}));
  EXPECT_EQ(ex.labels, (std::vector<double>{1.0}));
}

TEST(Encode, AnchorOutsideSentence) {
  Vocab vocab;
  const auto w = words(4);
  const Anchor a{3, 5, Role::kTrigger};
  EXPECT_THROW(encode_example(w, {&a, 1}, {}, vocab, FeatureConfig{}), EncodingError);
}

TEST(Encode, WindowKeepsAnchors) {
  std::mt19937_64 rng(5);
  Vocab vocab;
  FeatureConfig fc;
  const auto w = words(200);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Anchor> anchors;
    for (int k = 0; k < 2; ++k) {
      const std::size_t b = rng() % 200;
      anchors.push_back({b, std::min<std::size_t>(200, b + 1 + rng() % 3), Role::kArgument});
    }
    std::size_t lo = 200, hi = 0;
    for (const auto& a : anchors) lo = std::min(lo, a.begin), hi = std::max(hi, a.end);
    if (hi - lo > fc.max_window) {
      EXPECT_THROW(encode_example(w, anchors, {}, vocab, fc), EncodingError);
      continue;
    }
    const EncodedExample ex = encode_example(w, anchors, {}, vocab, fc);
    EXPECT_EQ(ex.length(), 100u);
    EXPECT_LE(ex.window_start, lo);
    EXPECT_GE(ex.window_start + ex.length(), hi);
    for (const auto& a : anchors) {
      for (std::size_t i = a.begin; i < a.end; ++i) {
        EXPECT_EQ(ex.roles[i - ex.window_start], role_index(Role::kArgument));
        EXPECT_EQ(ex.distances[0][i - ex.window_start] != 0, true);
      }
    }
    EXPECT_EQ(ex.roles.size(), ex.length());
    for (const auto& d : ex.distances) EXPECT_EQ(d.size(), ex.length());
  }
}

TEST(Encode, PaddingToWindow) {
  Vocab vocab;
  FeatureConfig fc;
  fc.max_window = 10;
  fc.pad_to_window = true;
  const auto w = words(4);
  const Anchor a{1, 2, Role::kTrigger};
  const EncodedExample ex = encode_example(w, {&a, 1}, {}, vocab, fc);
  EXPECT_EQ(ex.length(), 10u);
  EXPECT_EQ(ex.tokens[0], Vocab::kPadding);
  EXPECT_EQ(ex.roles[0], 0);
  EXPECT_EQ(ex.tokens.back(), Vocab::kPadding);
}

TEST(DistanceBucket, MonotoneAndClipped) {
  for (int d = -50; d < 50; ++d) EXPECT_LT(distance_bucket(d, 50), distance_bucket(d + 1, 50));
  EXPECT_EQ(distance_bucket(-50, 50), 1);
  EXPECT_EQ(distance_bucket(50, 50), 101);
  EXPECT_EQ(distance_bucket(-500, 50), 1);
  EXPECT_EQ(distance_bucket(999, 50), 101);
  EXPECT_EQ(distance_bucket(0, 50), 51);
}

TEST(AnchorDistance, SignedAroundSpan) {
  const Anchor a{3, 5, Role::kEntity1};
  EXPECT_EQ(anchor_distance(1, a), -2);
  EXPECT_EQ(anchor_distance(3, a), 0);
  EXPECT_EQ(anchor_distance(4, a), 0);
  EXPECT_EQ(anchor_distance(6, a), 2);
}

TEST(Embed, DefaultWidthIs224) {
  FeatureConfig fc;
  EXPECT_EQ(fc.feature_width(), 224u);
  EXPECT_EQ(padded_width(224, 8), 224u);
  EXPECT_EQ(padded_width(225, 8), 232u);
}

TEST(Embed, PaddingRowsAndExtraChannelsAreZero) {
  FeatureConfig fc;
  fc.word_dim = 6;
  fc.max_window = 6;
  fc.pad_to_window = true;
  const Vocab vocab = build_vocab({{"a", "b", "c"}}, 1);
  const FeatureTables tables = make_feature_tables(vocab, fc, 3);
  const std::vector<std::string> w{"a", "b", "zz"};
  const Anchor a{0, 1, Role::kEntity1};
  const EncodedExample ex = encode_example(w, {&a, 1}, {}, vocab, fc);
  const std::size_t width = fc.feature_width() + 2;
  const Tensor e = embed(ex, tables, fc, width);
  EXPECT_EQ(e.shape(), (Shape{6, width}));
  for (std::size_t i = 0; i < 6; ++i) {
    const bool pad = ex.tokens[i] == Vocab::kPadding;
    for (std::size_t c = 0; c < width; ++c) {
      if (pad || c >= fc.feature_width()) EXPECT_EQ(e.at(i, c), 0.0);
    }
  }
  EXPECT_EQ(testing::values(embed(ex, tables, fc, width)), testing::values(e));
}

TEST(Embed, IndexOutOfRange) {
  FeatureConfig fc;
  fc.word_dim = 4;
  const Vocab vocab = build_vocab({{"a"}}, 1);
  const FeatureTables tables = make_feature_tables(vocab, fc, 3);
  EncodedExample ex;
  ex.tokens = {2, 3};
  ex.roles = {1, 1};
  ex.distances = {{51, 51}, {51, 51}};
  EXPECT_THROW(embed(ex, tables, fc, fc.feature_width()), EncodingError);
  ex.tokens = {2, 2};
  ex.distances[1][0] = 500;
  EXPECT_THROW(embed(ex, tables, fc, fc.feature_width()), EncodingError);
}

TEST(FeatureTables, OneDistanceTablePerAnchor) {
  FeatureConfig fc;
  fc.word_dim = 4;
  const FeatureTables t = make_feature_tables(build_vocab({{"a"}}, 1), fc, 3);
  EXPECT_FALSE(t.words.trainable);
  EXPECT_TRUE(t.roles.trainable);
  ASSERT_EQ(t.distances.size(), 2u);
  EXPECT_EQ(t.distances[0].rows(), fc.distance_rows());
  for (const EmbeddingTable* table : t.all()) {
    for (std::size_t c = 0; c < table->dim(); ++c) EXPECT_EQ(table->weights.at(0, c), 0.0);
  }
}

TEST(FeatureConfig, Validation) {
  FeatureConfig fc;
  fc.max_window = 0;
  EXPECT_THROW(fc.validate(), ConfigError);
  fc = {};
  fc.max_distance = 0;
  EXPECT_THROW(fc.validate(), ConfigError);
}

}  // namespace
}  // namespace attnie
