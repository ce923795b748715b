#pragma once

#include <vector>

#include "attnie/features.h"
#include "attnie/model.h"
#include "attnie/pipeline.h"
#include "attnie/synth.h"
#include "attnie/training.h"
#include "attnie/workflow.h"

namespace attnie::testing {

// Edge-stage examples of a generated relation corpus: one per entity pair.
struct EdgeData {
  Vocab vocab;
  std::vector<std::string> labels;
  std::vector<EncodedExample> examples;
};

inline EdgeData edge_data(const std::vector<Document>& docs, const TaskSchema& schema,
                          const FeatureConfig& features, const Vocab* vocab = nullptr) {
  EdgeData out;
  out.vocab = vocab ? *vocab : build_vocab(corpus_sentences(docs), 1);
  const ExampleEncoder encoder{&out.vocab, features};
  PipelineDatasets data = training_examples(docs, schema, encoder);
  out.labels = data[Stage::kEdges].labels;
  out.examples = std::move(data[Stage::kEdges].examples);
  return out;
}

inline EdgeData edge_data(const SynthSpec& spec, const FeatureConfig& features) {
  const SynthCorpus corpus = generate(spec);
  return edge_data(corpus.documents, corpus.schema, features);
}

inline FeatureConfig small_features() {
  FeatureConfig f;
  f.word_dim = 8;
  f.role_dim = 4;
  f.distance_dim = 4;
  f.max_distance = 20;
  return f;
}

inline ModelConfig small_model(Variant variant, const FeatureConfig& features,
                               const std::vector<std::string>& labels) {
  ModelConfig mc;
  mc.arch.variant = variant;
  mc.arch.filters = 8;
  mc.arch.heads = 2;
  mc.arch.widths = {1, 3, 5, 7};
  mc.features = features;
  mc.labels = labels;
  return mc;
}

}  // namespace attnie::testing
