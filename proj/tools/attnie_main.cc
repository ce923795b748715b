// attnie: train, predict, evaluate, generate synthetic corpora, check
// gradients and export attention maps.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "attnie/errors.h"
#include "attnie/gradcheck.h"
#include "attnie/metrics.h"
#include "attnie/model.h"
#include "attnie/pipeline.h"
#include "attnie/standoff.h"
#include "attnie/synth.h"
#include "attnie/workflow.h"

namespace fs = std::filesystem;
using namespace attnie;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheck = 3;

std::size_t resolve_jobs(std::size_t jobs) {
  if (jobs) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

fs::path schema_path(const std::string& given, const fs::path& corpus) {
  return given.empty() ? corpus / "schema.json" : fs::path(given);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string corpus, schema, out, variant = "4mha-4cnn", vectors, widths = "1,3,5,7";
  PipelineTraining cfg;
  bool predicted_nodes = false;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* cmd = app.add_subcommand("train", "Train one ensemble per pipeline stage");
  TrainConfig& t = a.cfg.train;
  ArchitectureConfig& arch = a.cfg.model.arch;
  FeatureConfig& f = a.cfg.model.features;
  f.word_dim = 200;
  cmd->add_option("--corpus", a.corpus, "Directory of .txt/.a1/.a2 triplets")->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--schema", a.schema, "Task schema (default <corpus>/schema.json)");
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--variant", a.variant, "4cnn, 1mha, 4mha, 4cnn-4mha or 4mha-4cnn")
      ->capture_default_str();
  cmd->add_option("--seed", t.seed, "Random seed")->capture_default_str();
  cmd->add_option("--epochs", t.epochs)->capture_default_str();
  cmd->add_option("--batch-size", t.batch_size)->capture_default_str();
  cmd->add_option("--lr", t.learning_rate, "Adam learning rate")->capture_default_str();
  cmd->add_option("--dropout", t.dropout)->capture_default_str();
  cmd->add_option("--patience", t.patience, "Early-stopping patience, 0 = off")
      ->capture_default_str();
  cmd->add_option("--ensemble-train", t.ensemble_train, "Models trained per stage")
      ->capture_default_str();
  cmd->add_option("--ensemble-keep", t.ensemble_keep, "Models kept per stage")
      ->capture_default_str();
  cmd->add_option("--validation-fraction", t.validation_fraction)->capture_default_str();
  cmd->add_option("--threshold", a.cfg.options.threshold, "Decision threshold")
      ->capture_default_str();
  cmd->add_option("--jobs", t.jobs, "Worker threads, 0 = all cores")->capture_default_str();
  cmd->add_option("--filters", arch.filters)->capture_default_str();
  cmd->add_option("--heads", arch.heads)->capture_default_str();
  cmd->add_option("--widths", a.widths, "Comma-separated odd convolution widths")
      ->capture_default_str();
  cmd->add_flag("--scale-by-head-width", [&arch](std::int64_t) {
    arch.scale_by_model_width = false;
  }, "Scale attention scores by sqrt(d/H) instead of sqrt(d)");
  cmd->add_option("--word-dim", f.word_dim)->capture_default_str();
  cmd->add_option("--role-dim", f.role_dim)->capture_default_str();
  cmd->add_option("--distance-dim", f.distance_dim)->capture_default_str();
  cmd->add_option("--max-distance", f.max_distance)->capture_default_str();
  cmd->add_option("--max-window", f.max_window)->capture_default_str();
  cmd->add_option("--vectors", a.vectors, "word2vec text file")->check(CLI::ExistingFile);
  cmd->add_option("--min-count", a.cfg.min_count)->capture_default_str();
  cmd->add_option("--max-args", a.cfg.options.max_args)->capture_default_str();
  cmd->add_flag("--edges-on-predicted-nodes", a.predicted_nodes,
                "Train the edge stage on predicted rather than gold nodes");
}

std::vector<std::size_t> parse_widths(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw ConfigError("bad width '" + item + "' in --widths");
    }
  }
  return out;
}

int run_train(TrainArgs& a, const std::string& config_text) {
  const fs::path corpus = a.corpus;
  const TaskSchema schema = load_schema(schema_path(a.schema, corpus));
  PipelineTraining cfg = a.cfg;
  cfg.model.arch.variant = parse_variant(a.variant);
  cfg.model.arch.widths = parse_widths(a.widths);
  cfg.model.arch.validate();
  cfg.model.seed = cfg.train.seed;
  cfg.model.features.validate();
  cfg.train.validate();
  cfg.train.jobs = resolve_jobs(cfg.train.jobs);
  cfg.options.edges_on_gold_nodes = !a.predicted_nodes;

  std::optional<WordVectors> vectors;
  if (!a.vectors.empty()) {
    vectors = read_word2vec(a.vectors);
    cfg.model.features.word_dim = vectors->dim;
  }
  const auto docs = load_corpus(corpus, &schema);
  std::cerr << "train: " << docs.size() << " documents, variant " << a.variant << "\n";
  PipelineModels models = train_pipeline(docs, schema, cfg, vectors ? &*vectors : nullptr);

  const fs::path out = a.out;
  save_pipeline(models, out);
  write_file(out / "run.ini", config_text);
  for (Stage s : kStages) {
    if (!models[s]) {
      std::cerr << "  " << stage_name(s) << ": no labels or examples, skipped\n";
      continue;
    }
    for (const auto& m : models[s]->members) {
      std::cerr << "  " << stage_name(s) << ": member " << m.score.index << " validation F "
                << fmt(m.score.validation_f) << " (epoch " << m.result.best_epoch << ")\n";
    }
  }
  return 0;
}

// ---- predict -------------------------------------------------------------

struct PredictArgs {
  std::string model, corpus, out, schema;
  std::optional<double> threshold;
};

void add_predict(CLI::App& app, PredictArgs& a) {
  auto* cmd = app.add_subcommand("predict", "Predict .a2 files for a corpus");
  cmd->add_option("--model", a.model, "Directory written by train")->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--corpus", a.corpus, "Directory of .txt (and .a1) files")->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--schema", a.schema, "Must match the schema stored with the model");
  cmd->add_option("--threshold", a.threshold, "Override the stored decision threshold");
}

int run_predict(const PredictArgs& a) {
  PipelineModels models = load_pipeline(a.model);
  if (!a.schema.empty()) {
    const TaskSchema given = load_schema(a.schema);
    if (schema_to_json(given) != schema_to_json(models.schema)) {
      throw FormatError("schema " + a.schema + " differs from the one stored under " + a.model);
    }
  }
  if (a.threshold) models.options.threshold = *a.threshold;
  auto docs = load_corpus(a.corpus, &models.schema);
  DecodeReport report;
  const auto predicted = predict_corpus(models, docs, &report);

  const fs::path out = a.out;
  fs::create_directories(out);
  std::ostringstream tsv;
  WriteOptions wo;
  wo.renumber = true;
  for (const auto& doc : predicted) {
    save_a2(out, doc, wo);
    write_relation_tsv(tsv, relation_rows(doc));
  }
  write_file(out / "relations.tsv", tsv.str());
  std::ostringstream log;
  for (const auto& r : report.dropped) log << r << "\n";
  write_file(out / "dropped.log", log.str());
  std::cerr << "predict: " << predicted.size() << " documents, " << report.dropped.size()
            << " predictions dropped, " << report.truncated_triggers
            << " triggers hit the candidate cap\n";
  return 0;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string gold, pred, schema, out, bins;
  std::optional<double> min_f;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* cmd = app.add_subcommand("eval", "Score predictions against gold annotations");
  cmd->add_option("--gold", a.gold, "Gold corpus directory or .a2 file")->required()
      ->check(CLI::ExistingPath);
  cmd->add_option("--pred", a.pred, "Predicted directory or .a2 file")->required()
      ->check(CLI::ExistingPath);
  cmd->add_option("--schema", a.schema, "Task schema (default <gold dir>/schema.json if present)");
  cmd->add_option("--out", a.out, "Directory for scores.csv and distance.csv");
  cmd->add_option("--bins", a.bins, "Comma-separated lower bin edges (default 0,5,...,30)");
  cmd->add_option("--min-f", a.min_f, "Exit 3 when overall F falls below this");
}

std::string optional_file(const fs::path& p) { return fs::exists(p) ? read_file(p) : ""; }

int run_eval(const EvalArgs& a) {
  const fs::path gold_path = a.gold, pred_path = a.pred;
  const fs::path gold_dir = fs::is_directory(gold_path) ? gold_path : gold_path.parent_path();
  std::optional<TaskSchema> schema;
  if (!a.schema.empty()) {
    schema = load_schema(a.schema);
  } else if (fs::exists(gold_dir / "schema.json")) {
    schema = load_schema(gold_dir / "schema.json");
  }
  const TaskSchema* sp = schema ? &*schema : nullptr;

  std::vector<Document> gold, pred;
  if (fs::is_directory(gold_path)) {
    gold = load_corpus(gold_path, sp);
    if (!fs::is_directory(pred_path)) throw ConfigError("--pred must be a directory too");
    for (const auto& g : gold) {
      const fs::path stem = gold_path / g.id;
      pred.push_back(parse_standoff(g.text, optional_file(stem.string() + ".a1"),
                                    optional_file(pred_path / (g.id + ".a2")), g.id, sp));
    }
  } else {
    fs::path stem = gold_path;
    stem.replace_extension();
    const std::string id = stem.filename().string();
    const std::string text = read_file(stem.string() + ".txt");
    const std::string a1 = optional_file(stem.string() + ".a1");
    gold.push_back(parse_standoff(text, a1, read_file(gold_path), id, sp));
    pred.push_back(parse_standoff(text, a1, read_file(pred_path), id, sp));
  }

  const CorpusScores scores = evaluate_corpus(gold, pred, sp);
  std::vector<std::size_t> lower = default_distance_bins();
  if (!a.bins.empty()) lower = parse_widths(a.bins);
  const DistanceBins bins = distance_binned_eval(gold, pred, lower, sp);

  std::ostringstream csv;
  csv << "scope,tp,fp,fn,precision,recall,f1\n";
  auto row = [&](const std::string& name, const PRF& p) {
    csv << name << ',' << p.tp << ',' << p.fp << ',' << p.fn << ',' << fmt(p.precision())
        << ',' << fmt(p.recall()) << ',' << fmt(p.f1()) << '\n';
  };
  row("all", scores.all);
  row("events", scores.events);
  row("relations", scores.relations);
  row("modifiers", scores.modifiers);
  std::ostringstream dist;
  dist << "lower,tp,fp,fn,precision,recall,f1\n";
  for (std::size_t k = 0; k < bins.lower.size(); ++k) {
    const PRF& p = bins.scores[k];
    dist << bins.lower[k] << ',' << p.tp << ',' << p.fp << ',' << p.fn << ','
         << fmt(p.precision()) << ',' << fmt(p.recall()) << ',' << fmt(p.f1()) << '\n';
  }
  std::cout << csv.str();
  if (!a.out.empty()) {
    write_file(fs::path(a.out) / "scores.csv", csv.str());
    write_file(fs::path(a.out) / "distance.csv", dist.str());
  }
  if (a.min_f && scores.all.f1() < *a.min_f) {
    std::cerr << "eval: F " << fmt(scores.all.f1()) << " below " << fmt(*a.min_f) << "\n";
    return kExitCheck;
  }
  return 0;
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string spec = "single", out;
  SynthSpec s;
  std::optional<std::size_t> distance;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* cmd = app.add_subcommand("synth", "Write a synthetic corpus or the distance suite");
  cmd->add_option("--spec", a.spec, "single, or suite for distances 2/8/16/32")
      ->check(CLI::IsMember({"single", "suite"}))->capture_default_str();
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--documents", a.s.documents)->capture_default_str();
  cmd->add_option("--sentences-per-doc", a.s.sentences_per_doc)->capture_default_str();
  cmd->add_option("--distance", a.distance, "Fixed gap between the entities");
  cmd->add_option("--min-distance", a.s.min_distance)->capture_default_str();
  cmd->add_option("--max-distance", a.s.max_distance)->capture_default_str();
  cmd->add_option("--vocab-size", a.s.vocab_size)->capture_default_str();
  cmd->add_option("--rules", a.s.rules, "Cue pairs")->capture_default_str();
  cmd->add_option("--entity-names", a.s.entity_names)->capture_default_str();
  cmd->add_option("--positive-rate", a.s.positive_rate)->capture_default_str();
  cmd->add_option("--distractor-rate", a.s.distractor_rate)->capture_default_str();
  cmd->add_option("--negation-rate", a.s.negation_rate)->capture_default_str();
  cmd->add_flag("--events", a.s.events, "Binding events instead of relations");
  cmd->add_option("--seed", a.s.seed)->capture_default_str();
}

int run_synth(SynthArgs& a) {
  if (a.distance) a.s.min_distance = a.s.max_distance = *a.distance;
  const fs::path out = a.out;
  if (a.spec == "single") {
    write_corpus(out, generate(a.s));
    std::cerr << "synth: " << a.s.documents << " documents under " << out.string() << "\n";
    return 0;
  }
  for (const SynthSpec& s : distance_sweep_suite(a.s)) {
    char name[32];
    std::snprintf(name, sizeof name, "distance-%02zu", s.min_distance);
    write_corpus(out / name, generate(s));
    std::cerr << "synth: " << name << "\n";
  }
  return 0;
}

// ---- gradcheck -----------------------------------------------------------

struct GradArgs {
  std::size_t trials = 100;
  std::uint64_t seed = 42;
  double tolerance = 1e-4, network_tolerance = 1e-3;
  std::string out;
};

void add_gradcheck(CLI::App& app, GradArgs& a) {
  auto* cmd = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
  cmd->add_option("--trials", a.trials, "Random trials per operation")->capture_default_str();
  cmd->add_option("--seed", a.seed)->capture_default_str();
  cmd->add_option("--tolerance", a.tolerance, "Per-op relative error bound")
      ->capture_default_str();
  cmd->add_option("--network-tolerance", a.network_tolerance)->capture_default_str();
  cmd->add_option("--out", a.out, "Directory for gradcheck.csv");
}

int run_gradcheck(const GradArgs& a) {
  auto checks = op_gradient_suite(a.trials, a.seed, a.tolerance);
  checks.push_back(network_gradient_check(a.seed, a.network_tolerance));
  std::ostringstream csv;
  csv << "check,trials,max_rel_error,tolerance,passed\n";
  bool ok = true;
  for (const auto& c : checks) {
    char line[160];
    std::snprintf(line, sizeof line, "%s,%zu,%.3e,%.0e,%d\n", c.name.c_str(), c.trials,
                  c.max_error, c.tolerance, c.passed() ? 1 : 0);
    csv << line;
    ok = ok && c.passed();
  }
  std::cout << csv.str();
  if (!a.out.empty()) write_file(fs::path(a.out) / "gradcheck.csv", csv.str());
  return ok ? 0 : kExitCheck;
}

// ---- attn-export ---------------------------------------------------------

struct AttnArgs {
  std::string model, corpus, doc, stage = "edges", out;
  std::size_t member = 0, sentence = 0, example = 0;
};

void add_attn(CLI::App& app, AttnArgs& a) {
  auto* cmd = app.add_subcommand("attn-export", "Write summed attention heatmaps");
  cmd->add_option("--model", a.model, "Directory written by train")->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--corpus", a.corpus, "Annotated corpus directory")->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--doc", a.doc, "Document id (default: the first)");
  cmd->add_option("--stage", a.stage, "nodes, edges, events or modifiers")->capture_default_str();
  cmd->add_option("--member", a.member, "Ensemble member")->capture_default_str();
  cmd->add_option("--sentence", a.sentence)->capture_default_str();
  cmd->add_option("--example", a.example, "Example index within the sentence")
      ->capture_default_str();
  cmd->add_option("--out", a.out, "Output directory")->required();
}

int run_attn(const AttnArgs& a) {
  const PipelineModels models = load_pipeline(a.model);
  const Stage stage = parse_stage(a.stage);
  const auto& ensemble = models[stage];
  if (!ensemble) throw ConfigError("no " + a.stage + " model under " + a.model);
  if (a.member >= ensemble->members.size()) {
    throw ConfigError("member " + std::to_string(a.member) + " out of range");
  }
  const Model& model = ensemble->members[a.member].model;
  if (!model.config().arch.uses_attention()) {
    throw ConfigError("variant " + variant_name(model.config().arch.variant) +
                      " has no attention blocks");
  }
  const auto docs = load_corpus(a.corpus, &models.schema);
  const Document* doc = nullptr;
  for (const auto& d : docs) {
    if (a.doc.empty() || d.id == a.doc) {
      doc = &d;
      break;
    }
  }
  if (!doc) throw IngestionError("document '" + a.doc + "' not found under " + a.corpus);

  const ExampleEncoder encoder = models.encoder();
  const PipelineDatasets data = training_examples({*doc}, models.schema, encoder, models.options);
  std::vector<const EncodedExample*> picked;
  for (const auto& ex : data[stage].examples) {
    if (ex.sentence == a.sentence) picked.push_back(&ex);
  }
  if (a.example >= picked.size()) {
    throw ConfigError("sentence " + std::to_string(a.sentence) + " has " +
                      std::to_string(picked.size()) + " " + a.stage + " examples");
  }
  const EncodedExample& ex = *picked[a.example];
  const PreparedDocument prepared = prepare_document(*doc);
  const auto& words = prepared.words.at(ex.sentence);
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < ex.length(); ++i) {
    const std::size_t w = ex.window_start + i;
    tokens.push_back(ex.tokens[i] == Vocab::kPadding || w >= words.size() ? "<pad>" : words[w]);
  }
  const NetworkOutput net = model.run(ex, false, nullptr, true);
  const fs::path out = a.out;
  for (std::size_t b = 0; b < net.traces.size(); ++b) {
    const std::string stem = doc->id + "-s" + std::to_string(ex.sentence) + "-" + a.stage +
                             "-ex" + std::to_string(a.example) + "-block" + std::to_string(b);
    export_attention(net.traces[b], tokens, out / stem);
    std::cerr << "attn-export: " << (out / stem).string() << ".{csv,svg}\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-based event and relation extraction"};
  app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
  app.require_subcommand(1);
  app.set_version_flag("--version", "attnie 0.3.0");

  TrainArgs train;
  PredictArgs predict;
  EvalArgs eval;
  SynthArgs synth;
  GradArgs grad;
  AttnArgs attn;
  add_train(app, train);
  add_predict(app, predict);
  add_eval(app, eval);
  add_synth(app, synth);
  add_gradcheck(app, grad);
  add_attn(app, attn);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "train") return run_train(train, app.config_to_str(true, false));
    if (name == "predict") return run_predict(predict);
    if (name == "eval") return run_eval(eval);
    if (name == "synth") return run_synth(synth);
    if (name == "gradcheck") return run_gradcheck(grad);
    if (name == "attn-export") return run_attn(attn);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
