#include "attnie/workflow.h"

#include <algorithm>

#include "attnie/errors.h"
#include "attnie/standoff.h"
#include "json.hpp"

namespace attnie {
namespace {

using nlohmann::json;

constexpr int kPipelineVersion = 1;

std::size_t stage_index(Stage s) { return static_cast<std::size_t>(s); }

Ensemble train_stage(const StageDataset& data, Stage stage, const Vocab& vocab,
                     const PipelineTraining& config, const WordVectors* vectors) {
  ModelConfig mc = config.model;
  mc.labels = data.labels;
  TrainConfig tc = config.train;
  // Small stages (modifiers, say) may hold fewer examples than one batch.
  const std::size_t n = data.examples.size();
  const std::size_t n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(tc.validation_fraction * static_cast<double>(n))));
  if (n <= n_val) {
    throw ConfigError("stage " + stage_name(stage) + " has only " + std::to_string(n) +
                      " examples");
  }
  tc.batch_size = std::min(tc.batch_size, n - n_val);
  return train_ensemble(data.examples, mc, vocab, vectors, tc);
}

}  // namespace

std::vector<std::vector<std::string>> corpus_sentences(const std::vector<Document>& docs) {
  std::vector<std::vector<std::string>> out;
  for (const auto& doc : docs) {
    PreparedDocument p = prepare_document(doc);
    for (auto& words : p.words) out.push_back(std::move(words));
  }
  return out;
}

ExampleEncoder PipelineModels::encoder() const {
  for (const auto& stage : stages) {
    if (stage && !stage->members.empty()) {
      const Model& m = stage->members.front().model;
      return ExampleEncoder{&m.vocab(), m.config().features};
    }
  }
  throw ContractError("pipeline holds no trained stage");
}

StagePredictor PipelineModels::predictor() const {
  return [this](Stage s, const std::vector<EncodedExample>& examples) -> Confidences {
    const auto& ensemble = stages[stage_index(s)];
    if (ensemble) return ensemble_predict_all(*ensemble, examples);
    const std::size_t labels = stage_labels(schema, s).size();
    return Confidences(examples.size(), std::vector<double>(labels, 0.0));
  };
}

PipelineModels train_pipeline(const std::vector<Document>& docs, const TaskSchema& schema,
                              const PipelineTraining& config, const WordVectors* vectors) {
  if (docs.empty()) throw IngestionError("training corpus is empty");
  const Vocab vocab = build_vocab(corpus_sentences(docs), config.min_count);
  const ExampleEncoder encoder{&vocab, config.model.features};

  PipelineModels out;
  out.schema = schema;
  out.options = config.options;
  PipelineDatasets data = training_examples(docs, schema, encoder, config.options);
  auto fit = [&](Stage s) {
    const StageDataset& d = data[s];
    if (d.labels.empty() || d.examples.size() < 2) return;
    out.stages[stage_index(s)] = train_stage(d, s, vocab, config, vectors);
  };
  fit(Stage::kNodes);
  if (!config.options.edges_on_gold_nodes && out[Stage::kNodes]) {
    const StagePredictor nodes = out.predictor();
    data = training_examples(docs, schema, encoder, config.options, &nodes);
  }
  for (Stage s : {Stage::kEdges, Stage::kEvents, Stage::kModifiers}) fit(s);
  return out;
}

void save_pipeline(const PipelineModels& models, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "schema.json", schema_to_json(models.schema));
  json j;
  j["version"] = kPipelineVersion;
  j["threshold"] = models.options.threshold;
  json thresholds = json::array();
  for (const auto& t : models.options.stage_thresholds) {
    thresholds.push_back(t ? json(*t) : json(nullptr));
  }
  j["stage_thresholds"] = thresholds;
  j["max_args"] = models.options.max_args;
  j["max_candidates"] = models.options.max_candidates;
  j["edges_on_gold_nodes"] = models.options.edges_on_gold_nodes;
  json trained = json::array();
  for (Stage s : kStages) {
    if (!models[s]) continue;
    trained.push_back(stage_name(s));
    save_ensemble(*models[s], dir / stage_name(s));
  }
  j["stages"] = trained;
  write_file(dir / "pipeline.json", j.dump(2) + "\n");
}

PipelineModels load_pipeline(const std::filesystem::path& dir) {
  PipelineModels out;
  out.schema = load_schema(dir / "schema.json");
  const auto path = dir / "pipeline.json";
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (j.value("version", 0) != kPipelineVersion) {
    throw FormatError(path.string() + ": unsupported pipeline version " +
                      std::to_string(j.value("version", 0)) + " (expected " +
                      std::to_string(kPipelineVersion) + ")");
  }
  try {
    out.options.threshold = j.at("threshold").get<double>();
    const auto& th = j.at("stage_thresholds");
    for (std::size_t k = 0; k < out.options.stage_thresholds.size() && k < th.size(); ++k) {
      if (!th[k].is_null()) out.options.stage_thresholds[k] = th[k].get<double>();
    }
    out.options.max_args = j.at("max_args").get<std::size_t>();
    out.options.max_candidates = j.at("max_candidates").get<std::size_t>();
    out.options.edges_on_gold_nodes = j.at("edges_on_gold_nodes").get<bool>();
    for (const auto& name : j.at("stages")) {
      const Stage s = parse_stage(name.get<std::string>());
      Ensemble e = load_ensemble(dir / stage_name(s));
      const auto expected = stage_labels(out.schema, s);
      if (e.members.front().model.config().labels != expected) {
        throw FormatError(stage_name(s) + " model labels do not match " +
                          (dir / "schema.json").string());
      }
      out.stages[stage_index(s)] = std::move(e);
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }

  const Model* first = nullptr;
  for (const auto& stage : out.stages) {
    if (!stage) continue;
    for (const auto& m : stage->members) {
      if (!first) {
        first = &m.model;
      } else if (m.model.vocab().tokens() != first->vocab().tokens()) {
        throw FormatError("stage models under " + dir.string() + " disagree on the vocabulary");
      }
    }
  }
  if (!first) throw FormatError(path.string() + ": no trained stage");
  return out;
}

std::vector<Document> predict_corpus(const PipelineModels& models,
                                     const std::vector<Document>& docs, DecodeReport* report) {
  const ExampleEncoder encoder = models.encoder();
  const StagePredictor predictor = models.predictor();
  std::vector<Document> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    Document pred = strip_predictions(doc);
    pred.graph = run_pipeline(doc, models.schema, encoder, predictor, models.options, nullptr,
                              report);
    out.push_back(std::move(pred));
  }
  return out;
}

}  // namespace attnie
