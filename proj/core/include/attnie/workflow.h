#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "attnie/event_graph.h"
#include "attnie/features.h"
#include "attnie/model.h"
#include "attnie/pipeline.h"
#include "attnie/schema.h"
#include "attnie/training.h"

namespace attnie {

// Every word of every sentence, as the pipeline tokenizes them.
std::vector<std::vector<std::string>> corpus_sentences(const std::vector<Document>& docs);

// One ensemble per stage that has labels, all sharing one vocabulary and
// feature configuration.
struct PipelineModels {
  TaskSchema schema;
  PipelineOptions options;
  std::array<std::optional<Ensemble>, 4> stages;

  const std::optional<Ensemble>& operator[](Stage s) const {
    return stages[static_cast<std::size_t>(s)];
  }
  // Encoder over the shared vocabulary. Throws ContractError when no stage
  // holds a model.
  ExampleEncoder encoder() const;
  StagePredictor predictor() const;
};

struct PipelineTraining {
  ModelConfig model;  // labels and seed are filled in per stage
  TrainConfig train;
  PipelineOptions options;
  std::size_t min_count = 1;
};

PipelineModels train_pipeline(const std::vector<Document>& docs, const TaskSchema& schema,
                              const PipelineTraining& config,
                              const WordVectors* vectors = nullptr);

// <dir>/schema.json, <dir>/pipeline.json and one ensemble directory per
// trained stage.
void save_pipeline(const PipelineModels& models, const std::filesystem::path& dir);
// Throws FormatError when a stage's label inventory disagrees with the
// stored schema.
PipelineModels load_pipeline(const std::filesystem::path& dir);

// Runs the pipeline over each document (predictions stripped first).
std::vector<Document> predict_corpus(const PipelineModels& models,
                                     const std::vector<Document>& docs,
                                     DecodeReport* report = nullptr);

}  // namespace attnie
