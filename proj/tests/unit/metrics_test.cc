#include <random>

#include <gtest/gtest.h>

#include "attnie/errors.h"
#include "attnie/layers.h"
#include "attnie/metrics.h"
#include "attnie/standoff.h"
#include "test_util.h"

namespace attnie {
namespace {

namespace fs = std::filesystem;

TEST(MicroPrf, Examples) {
  const PRF same = micro_prf({"a", "b"}, {"a", "b"});
  EXPECT_EQ(same.precision(), 1.0);
  EXPECT_EQ(same.recall(), 1.0);
  EXPECT_EQ(same.f1(), 1.0);
  const PRF half = micro_prf({"a", "b"}, {"a", "c"});
  EXPECT_EQ(half.precision(), 0.5);
  EXPECT_EQ(half.recall(), 0.5);
  EXPECT_EQ(half.f1(), 0.5);
  const PRF none = micro_prf({"a"}, {});
  EXPECT_EQ(none.precision(), 0.0);
  EXPECT_EQ(none.recall(), 0.0);
  EXPECT_EQ(none.f1(), 0.0);
}

TEST(MicroPrf, SwapExchangesPrecisionAndRecall) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    TupleSet g, p;
    for (int i = 0; i < 12; ++i) {
      if (rng() % 2) g.insert(std::to_string(i));
      if (rng() % 2) p.insert(std::to_string(i));
    }
    const PRF a = micro_prf(g, p), b = micro_prf(p, g);
    EXPECT_EQ(a.precision(), b.recall());
    EXPECT_EQ(a.recall(), b.precision());
    EXPECT_EQ(a.f1(), b.f1());
  }
}

TEST(MultilabelPrf, CountsAtThreshold) {
  const PRF f = multilabel_prf({{1, 0}, {0, 1}}, {{0.5, 0.7}, {0.1, 0.49}});
  EXPECT_EQ(f, (PRF{1, 1, 1}));
}

Document doc_with(const std::string& text, const std::string& a1, const std::string& a2,
                  const TaskSchema& schema) {
  return parse_standoff(text, a1, a2, "d", &schema);
}

TEST(Tuples, NestedEventsMatchOnFullStructure) {
  const TaskSchema schema = load_schema(testing::fixtures() / "events" / "schema.json");
  const std::string text = "p65 expression induced by IL-6";
  const std::string a1 = "T1\tProtein 0 3\tp65\nT2\tProtein 26 30\tIL-6\n";
  const std::string triggers =
      "T3\tGene_expression 4 14\texpression\nT4\tPositive_regulation 15 22\tinduced\n";
  const Document gold = doc_with(text, a1, triggers +
      "E1\tGene_expression:T3 Theme:T1\nE2\tPositive_regulation:T4 Theme:E1 Cause:T2\n", schema);
  const Document noncause = doc_with(text, a1, triggers +
      "E1\tGene_expression:T3 Theme:T1\nE2\tPositive_regulation:T4 Theme:E1\n", schema);
  const CorpusScores s = evaluate_corpus({gold}, {noncause}, &schema);
  EXPECT_EQ(s.events, (PRF{1, 1, 1}));
  EXPECT_EQ(evaluate_corpus({gold}, {gold}, &schema).all.f1(), 1.0);
  EXPECT_EQ(evaluate_corpus({gold}, {}, &schema).all, (PRF{0, 0, 2}));
}

TEST(Distance, FarthestNodes) {
  const TaskSchema schema = load_schema(testing::fixtures() / "relations" / "schema.json");
  const Document adjacent = doc_with("COX2 PTGS1", "T1\tGene 0 4\tCOX2\nT2\tGene 5 10\tPTGS1\n",
                                     "", schema);
  EXPECT_EQ(farthest_distance(adjacent, {&adjacent.graph.nodes[0], &adjacent.graph.nodes[1]}), 0u);
  std::string text = "COX2";
  for (int i = 0; i < 12; ++i) text += " x";
  const std::size_t at = text.size() + 1;
  text += " PTGS1";
  const Document far = doc_with(
      text, "T1\tGene 0 4\tCOX2\nT2\tGene " + std::to_string(at) + " " + std::to_string(at + 5) +
                "\tPTGS1\n",
      "", schema);
  EXPECT_EQ(farthest_distance(far, {&far.graph.nodes[0], &far.graph.nodes[1]}), 12u);
  DistanceBins bins;
  bins.lower = {0, 6, 11};
  EXPECT_EQ(bins.bin_of(12), 2u);
  EXPECT_EQ(bins.bin_of(0), 0u);
  EXPECT_EQ(bins.bin_of(6), 1u);
}

TEST(Distance, BinsPartitionCounts) {
  const fs::path dir = testing::fixtures() / "relations";
  const TaskSchema schema = load_schema(dir / "schema.json");
  const auto gold = load_corpus(dir, &schema);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Document> pred = gold;
    for (auto& d : pred) {
      auto& rel = d.graph.relations;
      for (std::size_t i = rel.size(); i-- > 0;) {
        if (rng() % 2) rel.erase(rel.begin() + static_cast<std::ptrdiff_t>(i));
      }
      if (rng() % 2 && d.graph.nodes.size() >= 2) {
        d.graph.relations.push_back({"R99", "Interacts", {"Arg1", d.graph.nodes[1].id},
                                     {"Arg2", d.graph.nodes.back().id}});
      }
    }
    const DistanceBins bins =
        distance_binned_eval(gold, pred, {0, 1, 3, 5}, &schema);
    PRF total;
    for (const PRF& p : bins.scores) total += p;
    const CorpusScores s = evaluate_corpus(gold, pred, &schema);
    PRF expect = s.relations;
    expect += s.events;
    EXPECT_EQ(total, expect);
  }
  const DistanceBins defaults = distance_binned_eval(gold, gold);
  EXPECT_EQ(defaults.lower, default_distance_bins());
}

AttentionTrace trace_of(std::size_t len, std::size_t heads, std::mt19937_64& rng) {
  AttentionParams p = AttentionParams::init(heads * 2, heads, rng);
  return multi_head_attention(testing::random_tensor(rng, {len, heads * 2}), p).trace;
}

TEST(Attention, SummedRowsEqualHeads) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t heads = 1 + rng() % 4, len = 1 + rng() % 7;
    const Matrix m = summed_attention(trace_of(len, heads, rng));
    ASSERT_EQ(m.size(), len);
    for (const auto& row : m) {
      double s = 0;
      for (double v : row) s += v;
      EXPECT_NEAR(s, static_cast<double>(heads), 1e-6);
    }
  }
  const Matrix one = summed_attention(trace_of(1, 3, rng));
  EXPECT_NEAR(one[0][0], 3.0, 1e-12);
}

TEST(Attention, UniformWeightsGiveConstantMatrix) {
  AttentionTrace t;
  t.weights = Tensor::full({2, 4, 4}, 0.25);
  for (const auto& row : summed_attention(t)) {
    for (double v : row) EXPECT_EQ(v, 0.5);
  }
}

TEST(Attention, CsvRoundTripAndSvg) {
  std::mt19937_64 rng(5);
  const Matrix m = summed_attention(trace_of(4, 2, rng));
  const std::vector<std::string> tokens{"a", "b,c", "\"q\"", "d"};
  const AttentionTable back = parse_attention_csv(attention_csv(m, tokens));
  EXPECT_EQ(back.tokens, tokens);
  EXPECT_EQ(back.values, m);
  const std::string svg = attention_svg(m, tokens);
  EXPECT_EQ(svg.rfind("<svg", 0) == 0 || svg.rfind("<?xml", 0) == 0, true);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_THROW(attention_csv(m, {"a"}), ContractError);
  EXPECT_THROW(attention_svg(m, {"a"}), ContractError);
}

TEST(Attention, ExportWritesFiles) {
  std::mt19937_64 rng(6);
  const auto dir = testing::scratch_dir("attn");
  export_attention(trace_of(3, 2, rng), {"x", "y", "z"}, dir / "map");
  EXPECT_TRUE(fs::exists(dir / "map.csv"));
  EXPECT_TRUE(fs::exists(dir / "map.svg"));
}

}  // namespace
}  // namespace attnie
