#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "attnie/event_graph.h"
#include "attnie/features.h"
#include "attnie/schema.h"
#include "attnie/text.h"

namespace attnie {

// The four classification stages, in pipeline order.
enum class Stage { kNodes, kEdges, kEvents, kModifiers };
inline constexpr std::array<Stage, 4> kStages{Stage::kNodes, Stage::kEdges,
                                              Stage::kEvents, Stage::kModifiers};
std::string stage_name(Stage stage);  // "nodes", "edges", "events", "modifiers"
Stage parse_stage(std::string_view name);

struct PipelineOptions {
  double threshold = 0.5;
  std::array<std::optional<double>, 4> stage_thresholds{};
  std::size_t max_args = 4;
  // Event candidates kept per trigger before enumeration stops.
  std::size_t max_candidates = 512;
  // Train the edge stage on gold nodes rather than predicted ones.
  bool edges_on_gold_nodes = true;

  double threshold_for(Stage stage) const;
};

// Vocabulary plus feature settings; turns anchors into model inputs.
struct ExampleEncoder {
  const Vocab* vocab = nullptr;
  FeatureConfig features;

  EncodedExample encode(const std::vector<std::string>& words,
                        const std::vector<Anchor>& anchors,
                        std::vector<double> labels, std::size_t sentence) const;
};

// A document split into sentences. Node spans are protected from
// sentence splitting.
struct PreparedDocument {
  const Document* document = nullptr;
  std::vector<Sentence> sentences;
  std::vector<std::vector<std::string>> words;

  // Sentence holding the node's first byte; npos when none does.
  std::size_t sentence_of(const Node& node) const;
  // Token range of the node within its sentence.
  std::pair<std::size_t, std::size_t> tokens_of(const Node& node) const;
};

PreparedDocument prepare_document(const Document& doc);

struct NodeCandidate {
  std::size_t sentence = 0;
  std::size_t token = 0;
};

struct EdgeCandidate {
  std::string source;
  std::string target;
  std::size_t sentence = 0;
};

// Argument targets are node ids; nested events are resolved when decoding.
struct EventCandidate {
  std::string trigger;
  std::vector<Argument> args;
  std::size_t sentence = 0;
};

struct ModifierCandidate {
  std::string event;
  std::size_t sentence = 0;
};

template <class Candidate>
struct StageExamples {
  std::vector<EncodedExample> examples;
  std::vector<Candidate> candidates;
};

// One example per token of `sentence`; labels are the schema's node labels
// whose gold span covers the token. Without gold the labels are all zero.
StageExamples<NodeCandidate> gen_node_examples(const PreparedDocument& doc,
                                               std::size_t sentence,
                                               const TaskSchema& schema,
                                               const ExampleEncoder& encoder,
                                               const EventGraph* gold);

// One example per schema-valid ordered pair of distinct nodes of `graph`
// lying in `sentence`. Pairs valid only for undirected relation types are
// emitted once, in text order.
StageExamples<EdgeCandidate> gen_edge_examples(const PreparedDocument& doc,
                                               std::size_t sentence,
                                               const EventGraph& graph,
                                               const TaskSchema& schema,
                                               const ExampleEncoder& encoder,
                                               const EventGraph* gold);

// Whether `label` may type the edge source -> target.
bool edge_label_valid(const TaskSchema& schema, const Node& source,
                      const Node& target, std::string_view label);

// Argument subsets of the trigger's outgoing role edges accepted by the
// schema, smallest first, then lexicographic over edges sorted by target
// position. Repeated non-repeating roles are numbered (Theme, Theme2, ..).
// Stops after `cap` sets and reports it through `truncated`.
std::vector<std::vector<Argument>> enumerate_argument_sets(
    const Node& trigger, const std::vector<Edge>& outgoing,
    const EventGraph& graph, const TaskSchema& schema, std::size_t max_args,
    std::size_t cap, bool* truncated = nullptr);

StageExamples<EventCandidate> gen_event_candidates(
    const PreparedDocument& doc, const Node& trigger,
    const std::vector<Edge>& outgoing, const EventGraph& graph,
    const TaskSchema& schema, const ExampleEncoder& encoder,
    const EventGraph* gold, const PipelineOptions& options,
    bool* truncated = nullptr);

// One example per event of `graph`; labels over the schema's modifiers.
StageExamples<ModifierCandidate> gen_modifier_examples(
    const PreparedDocument& doc, const EventGraph& graph,
    const TaskSchema& schema, const ExampleEncoder& encoder,
    const EventGraph* gold);

// Returns one row per example, in the stage's label order.
using StagePredictor =
    std::function<Confidences(Stage, const std::vector<EncodedExample>&)>;

// Returns each example's own labels; decoding with it reproduces gold.
Confidences project_labels(Stage stage, const std::vector<EncodedExample>& examples);

struct DecodeReport {
  std::vector<std::string> dropped;  // one reason per discarded prediction
  std::size_t truncated_triggers = 0;
};

// Staged decoding. Each step keeps labels at or above `threshold` and
// drops schema-invalid survivors, logging the reason into `report`.
void decode_nodes(EventGraph& graph, const PreparedDocument& doc,
                  const StageExamples<NodeCandidate>& batch,
                  const Confidences& confidences, const TaskSchema& schema,
                  double threshold);
std::vector<Edge> decode_edges(const EventGraph& graph,
                               const StageExamples<EdgeCandidate>& batch,
                               const Confidences& confidences,
                               const TaskSchema& schema, double threshold,
                               DecodeReport* report);
void decode_events(EventGraph& graph, const std::vector<EventCandidate>& accepted,
                   DecodeReport* report);
void decode_modifiers(EventGraph& graph, const StageExamples<ModifierCandidate>& batch,
                      const Confidences& confidences, const TaskSchema& schema,
                      double threshold);
// Adds relations for relation-typed edges; drops triggers without events.
void finish_graph(EventGraph& graph, const std::vector<Edge>& edges,
                  const TaskSchema& schema, DecodeReport* report);

// Runs all four stages over `input` (its given entities seed the graph).
// With `gold`, examples carry gold labels so a label-projecting predictor
// can be used as an oracle.
EventGraph run_pipeline(const Document& input, const TaskSchema& schema,
                        const ExampleEncoder& encoder,
                        const StagePredictor& predictor,
                        const PipelineOptions& options = {},
                        const EventGraph* gold = nullptr,
                        DecodeReport* report = nullptr);

// Labelled training examples of every stage over gold documents. When
// options.edges_on_gold_nodes is false, `node_predictor` supplies the
// nodes the edge stage is trained on.
struct StageDataset {
  std::vector<std::string> labels;
  std::vector<EncodedExample> examples;
};
struct PipelineDatasets {
  std::array<StageDataset, 4> stages;
  std::size_t truncated_triggers = 0;

  StageDataset& operator[](Stage s) { return stages[static_cast<std::size_t>(s)]; }
  const StageDataset& operator[](Stage s) const {
    return stages[static_cast<std::size_t>(s)];
  }
};
std::vector<std::string> stage_labels(const TaskSchema& schema, Stage stage);
PipelineDatasets training_examples(const std::vector<Document>& gold_docs,
                                   const TaskSchema& schema,
                                   const ExampleEncoder& encoder,
                                   const PipelineOptions& options = {},
                                   const StagePredictor* node_predictor = nullptr);

// Copy of `doc` keeping only the given entities.
Document strip_predictions(const Document& doc);

}  // namespace attnie
