#include <gtest/gtest.h>

#include "attnie/errors.h"
#include "attnie/metrics.h"
#include "attnie/standoff.h"
#include "attnie/workflow.h"
#include "test_util.h"

namespace attnie {
namespace {

namespace fs = std::filesystem;

PipelineTraining tiny_training() {
  PipelineTraining cfg;
  cfg.model.arch.variant = Variant::kFourMhaFourCnn;
  cfg.model.arch.filters = 4;
  cfg.model.arch.heads = 2;
  cfg.model.arch.widths = {1, 3};
  cfg.model.features.word_dim = 6;
  cfg.model.features.role_dim = 4;
  cfg.model.features.distance_dim = 3;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 8;
  cfg.train.ensemble_train = 2;
  cfg.train.ensemble_keep = 1;
  cfg.train.validation_fraction = 0.3;
  cfg.train.jobs = 1;
  return cfg;
}

TEST(Workflow, TrainSaveLoadPredict) {
  const fs::path dir = testing::fixtures() / "events";
  const TaskSchema schema = load_schema(dir / "schema.json");
  const auto docs = load_corpus(dir, &schema);
  const PipelineModels models = train_pipeline(docs, schema, tiny_training());
  EXPECT_TRUE(models[Stage::kNodes].has_value());
  EXPECT_TRUE(models[Stage::kEdges].has_value());

  const fs::path out = testing::scratch_dir("pipeline");
  save_pipeline(models, out);
  EXPECT_TRUE(fs::exists(out / "pipeline.json"));
  EXPECT_TRUE(fs::exists(out / "schema.json"));
  const PipelineModels back = load_pipeline(out);
  for (Stage s : kStages) EXPECT_EQ(back[s].has_value(), models[s].has_value()) << stage_name(s);

  DecodeReport report;
  const auto a = predict_corpus(models, docs, &report);
  const auto b = predict_corpus(back, docs);
  ASSERT_EQ(a.size(), docs.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(write_a2(a[i], {true}), write_a2(b[i], {true}));
    EXPECT_NO_THROW(a[i].graph.validate(a[i].text));
  }
}

TEST(Workflow, LoadRejectsMismatches) {
  const fs::path dir = testing::fixtures() / "relations";
  const TaskSchema schema = load_schema(dir / "schema.json");
  const auto docs = load_corpus(dir, &schema);
  PipelineTraining cfg = tiny_training();
  cfg.train.batch_size = 1;
  cfg.train.validation_fraction = 0.4;
  const PipelineModels models = train_pipeline(docs, schema, cfg);
  const fs::path out = testing::scratch_dir("pipeline-bad");
  save_pipeline(models, out);

  std::string json = read_file(out / "pipeline.json");
  write_file(out / "pipeline.json", "{\"version\": 99}");
  EXPECT_THROW(load_pipeline(out), FormatError);
  write_file(out / "pipeline.json", json);

  TaskSchema other = schema;
  other.relations.erase("Interacts");
  write_file(out / "schema.json", schema_to_json(other));
  EXPECT_THROW(load_pipeline(out), FormatError);
}

TEST(Workflow, EmptyCorpus) {
  EXPECT_THROW(train_pipeline({}, TaskSchema{}, tiny_training()), IngestionError);
  PipelineModels none;
  EXPECT_THROW(none.encoder(), ContractError);
}

}  // namespace
}  // namespace attnie
