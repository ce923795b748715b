#include <fstream>
#include <map>

#include <gtest/gtest.h>

#include "attnie/errors.h"
#include "attnie/metrics.h"
#include "attnie/standoff.h"
#include "attnie/synth.h"
#include "attnie/text.h"
#include "test_util.h"

namespace attnie {
namespace {

namespace fs = std::filesystem;

std::vector<const Node*> involved(const EventGraph& g, const std::vector<Argument>& args) {
  std::vector<const Node*> out;
  for (const auto& a : args) out.push_back(g.find_node(g.argument_node(a.target)));
  return out;
}

TEST(Synth, SeededCorpusIsByteIdentical) {
  SynthSpec spec;
  spec.seed = 9;
  const auto a = testing::scratch_dir("synth-a"), b = testing::scratch_dir("synth-b");
  write_corpus(a, generate(spec));
  write_corpus(b, generate(spec));
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    EXPECT_EQ(read_file(entry.path()), read_file(b / entry.path().filename()))
        << entry.path().filename();
    ++files;
  }
  EXPECT_EQ(files, spec.documents * 3 + 2);
  spec.seed = 10;
  EXPECT_NE(write_a2(generate(spec).documents[0]) + generate(spec).documents[0].text,
            write_a2(generate(SynthSpec{}).documents[0]) + generate(SynthSpec{}).documents[0].text);
}

TEST(Synth, FixedDistance) {
  for (bool events : {false, true}) {
    SynthSpec spec;
    spec.events = events;
    spec.min_distance = spec.max_distance = 2;
    spec.positive_rate = 1.0;
    const SynthCorpus c = generate(spec);
    std::size_t seen = 0;
    for (const auto& d : c.documents) {
      for (const auto& r : d.graph.relations) {
        EXPECT_EQ(farthest_distance(d, involved(d.graph, {r.arg1, r.arg2})), 2u);
        ++seen;
      }
      for (const auto& e : d.graph.events) {
        auto nodes = involved(d.graph, e.args);
        nodes.push_back(d.graph.find_node(e.trigger));
        EXPECT_EQ(farthest_distance(d, nodes), 2u);
        ++seen;
      }
    }
    EXPECT_EQ(seen, spec.sentences());
  }
}

TEST(Synth, DistanceRange) {
  SynthSpec spec;
  spec.min_distance = 3;
  spec.max_distance = 9;
  spec.positive_rate = 1.0;
  spec.documents = 30;
  for (const auto& d : generate(spec).documents) {
    for (const auto& r : d.graph.relations) {
      const std::size_t dist = farthest_distance(d, involved(d.graph, {r.arg1, r.arg2}));
      EXPECT_GE(dist, 3u);
      EXPECT_LE(dist, 9u);
    }
  }
}

TEST(Synth, RoundTripsThroughStandoff) {
  for (bool events : {false, true}) {
    SynthSpec spec;
    spec.events = events;
    spec.negation_rate = events ? 0.5 : 0.0;
    const SynthCorpus c = generate(spec);
    const auto dir = testing::scratch_dir("synth-rt");
    write_corpus(dir, c);
    const TaskSchema schema = load_schema(dir / "schema.json");
    const auto back = load_corpus(dir, &schema);
    ASSERT_EQ(back.size(), c.documents.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      EXPECT_NO_THROW(back[i].graph.validate(back[i].text));
      EXPECT_TRUE(isomorphic(back[i].graph, c.documents[i].graph, &schema));
      EXPECT_EQ(write_a2(back[i]), read_file(dir / (back[i].id + ".a2")));
    }
    std::ifstream tsv(dir / "relations.tsv");
    EXPECT_TRUE(tsv.good());
  }
}

TEST(Synth, LabelIsFunctionOfCues) {
  SynthSpec spec;
  spec.documents = 40;
  spec.distractor_rate = 0.0;
  const SynthCorpus c = generate(spec);
  // Sentences with the same first and last cue words share a label.
  std::map<std::pair<std::string, std::string>, bool> seen;
  for (const auto& d : c.documents) {
    const auto sents = split_sentences(d.text);
    for (const auto& s : sents) {
      std::vector<const Node*> ents;
      for (const auto& n : d.graph.nodes) {
        if (n.begin() >= s.begin && n.end() <= s.end) ents.push_back(&n);
      }
      ASSERT_EQ(ents.size(), 2u);
      const auto [b0, e0] = token_range(s, ents[0]->begin(), ents[0]->end());
      const auto [b1, e1] = token_range(s, ents[1]->begin(), ents[1]->end());
      ASSERT_GT(b0, 0u);
      const std::pair<std::string, std::string> cues{s.tokens[b0 - 1].text, s.tokens[e1].text};
      bool positive = false;
      for (const auto& r : d.graph.relations) {
        positive |= (r.arg1.target == ents[0]->id || r.arg2.target == ents[0]->id);
      }
      auto [it, fresh] = seen.emplace(cues, positive);
      if (!fresh) EXPECT_EQ(it->second, positive);
      (void)e0;
      (void)b1;
    }
  }
}

TEST(Synth, Validation) {
  SynthSpec spec;
  spec.min_distance = 5;
  spec.max_distance = 2;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = {};
  spec.positive_rate = 1.5;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = {};
  spec.vocab_size = 3;
  EXPECT_THROW(generate(spec), ConfigError);
}

TEST(Synth, SweepSuite) {
  const auto suite = distance_sweep_suite();
  ASSERT_EQ(suite.size(), 4u);
  const std::size_t expect[] = {2, 8, 16, 32};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(suite[i].min_distance, expect[i]);
    EXPECT_EQ(suite[i].max_distance, expect[i]);
    SynthSpec a = suite[i], b = suite[0];
    a.min_distance = a.max_distance = b.min_distance = b.max_distance = 0;
    EXPECT_EQ(a.seed, b.seed);
    EXPECT_EQ(a.vocab_size, b.vocab_size);
    EXPECT_EQ(a.rules, b.rules);
    EXPECT_EQ(a.sentences(), b.sentences());
    EXPECT_EQ(a.positive_rate, b.positive_rate);
    EXPECT_EQ(a.distractor_rate, b.distractor_rate);
    EXPECT_EQ(a.events, b.events);
    EXPECT_EQ(generate(suite[i]).documents.size(), suite[i].documents);
  }
}

}  // namespace
}  // namespace attnie
