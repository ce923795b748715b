#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "attnie/event_graph.h"
#include "attnie/schema.h"

namespace attnie {

// Planted-pattern corpus. Every sentence reads
//   [context] left-cue E1 [gap] E2 right-cue [context] .
// where the gap holds `distance` tokens. The pair is positive exactly when
// the cues form one of the rule pairs (left_k, right_k); distractor cues
// may appear inside the gap. In event mode the trigger lexeme sits in the
// middle of the gap and positives become Binding events (optionally
// negated by a preceding negation lexeme); otherwise positives are
// undirected relations.
struct SynthSpec {
  std::size_t vocab_size = 60;       // distinct lexemes, cues included
  std::size_t rules = 4;             // cue pairs
  std::size_t entity_names = 16;
  std::size_t min_distance = 2;
  std::size_t max_distance = 2;
  std::size_t min_context = 1;       // filler tokens on each outer side
  std::size_t max_context = 3;
  double positive_rate = 0.5;
  double distractor_rate = 0.15;     // per gap token
  double negation_rate = 0.0;        // event mode only
  bool events = false;
  std::string relation_type = "Assoc";
  std::string trigger_lexeme = "binds";
  std::string negation_lexeme = "not";
  std::size_t documents = 10;
  std::size_t sentences_per_doc = 2;
  std::uint64_t seed = 1;

  // Throws ConfigError on inverted ranges, rates outside [0,1], or a
  // vocabulary too small for the rule lexemes.
  void validate() const;
  std::size_t sentences() const { return documents * sentences_per_doc; }
};

struct SynthCorpus {
  TaskSchema schema;
  std::vector<Document> documents;
};

TaskSchema synth_schema(const SynthSpec& spec);
SynthCorpus generate(const SynthSpec& spec);

// Writes <doc>.txt/.a1/.a2, schema.json and relations.tsv.
void write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus);

// Four specs with distances 2, 8, 16 and 32 and otherwise identical
// fields, including the seed.
std::vector<SynthSpec> distance_sweep_suite(const SynthSpec& base = {});

}  // namespace attnie
