#include "attnie/synth.h"

#include <optional>
#include <random>
#include <sstream>

#include "attnie/errors.h"
#include "attnie/standoff.h"

namespace attnie {
namespace {

std::size_t reserved_lexemes(const SynthSpec& s) { return 2 * s.rules + (s.events ? 2 : 0); }

std::string left_cue(std::size_t k) { return "la" + std::to_string(k); }
std::string right_cue(std::size_t k) { return "rb" + std::to_string(k); }

struct Planted {
  std::vector<std::string> tokens;
  std::size_t e1 = 0, e2 = 0, trigger = 0;
  bool positive = false;
  bool negated = false;
};

Planted plant(const SynthSpec& spec, std::mt19937_64& rng) {
  const std::size_t fillers = spec.vocab_size - reserved_lexemes(spec);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto chance = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };
  auto filler = [&] { return "w" + std::to_string(pick(fillers)); };
  auto context = [&] {
    return std::uniform_int_distribution<std::size_t>(spec.min_context, spec.max_context)(rng);
  };

  Planted p;
  const std::size_t distance =
      std::uniform_int_distribution<std::size_t>(spec.min_distance, spec.max_distance)(rng);
  const std::size_t k1 = pick(spec.rules);
  p.positive = chance(spec.positive_rate);
  std::size_t k2 = k1;
  if (!p.positive) {
    k2 = pick(spec.rules - 1);
    if (k2 >= k1) ++k2;
  }
  const std::size_t a = pick(spec.entity_names);
  std::size_t b = pick(spec.entity_names - 1);
  if (b >= a) ++b;

  for (std::size_t i = context(); i > 0; --i) p.tokens.push_back(filler());
  p.tokens.push_back(left_cue(k1));
  p.e1 = p.tokens.size();
  p.tokens.push_back("p" + std::to_string(a));

  std::vector<std::string> gap(distance);
  std::vector<bool> fixed(distance, false);
  if (spec.events) {
    const std::size_t mid = distance / 2;
    gap[mid] = spec.trigger_lexeme;
    fixed[mid] = true;
    p.negated = chance(spec.negation_rate);
    if (p.negated) {
      gap[mid - 1] = spec.negation_lexeme;
      fixed[mid - 1] = true;
    }
    p.trigger = p.tokens.size() + mid;
  }
  for (std::size_t i = 0; i < distance; ++i) {
    if (fixed[i]) continue;
    if (chance(spec.distractor_rate)) {
      gap[i] = chance(0.5) ? left_cue(pick(spec.rules)) : right_cue(pick(spec.rules));
    } else {
      gap[i] = filler();
    }
  }
  p.tokens.insert(p.tokens.end(), gap.begin(), gap.end());
  p.e2 = p.tokens.size();
  p.tokens.push_back("p" + std::to_string(b));
  p.tokens.push_back(right_cue(k2));
  for (std::size_t i = context(); i > 0; --i) p.tokens.push_back(filler());
  p.tokens.push_back(".");
  return p;
}

}  // namespace

void SynthSpec::validate() const {
  if (min_distance > max_distance) throw ConfigError("synth: min distance exceeds max distance");
  if (min_context > max_context) throw ConfigError("synth: min context exceeds max context");
  for (double r : {positive_rate, distractor_rate, negation_rate}) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("synth: rates must lie in [0,1]");
  }
  if (rules < 2) throw ConfigError("synth: need at least two cue rules");
  if (entity_names < 2) throw ConfigError("synth: need at least two entity names");
  if (vocab_size < reserved_lexemes(*this) + 2) {
    throw ConfigError("synth: vocabulary of " + std::to_string(vocab_size) +
                      " cannot hold the " + std::to_string(reserved_lexemes(*this)) +
                      " rule lexemes plus two fillers");
  }
  if (events && min_distance < 2) {
    throw ConfigError("synth: event mode needs a gap of at least two tokens");
  }
  if (documents == 0 || sentences_per_doc == 0) throw ConfigError("synth: empty corpus");
  if (relation_type.empty() || trigger_lexeme.empty() || negation_lexeme.empty()) {
    throw ConfigError("synth: lexemes and type names must be non-empty");
  }
}

TaskSchema synth_schema(const SynthSpec& spec) {
  TaskSchema s;
  s.name = spec.events ? "synth-events" : "synth-relations";
  s.given_entities = true;
  s.entity_types = {"Protein"};
  if (spec.events) {
    EventTypeSpec binding;
    binding.roles["Theme"] = RoleSpec{{"Protein"}, 1, 1};
    binding.roles["Theme2"] = RoleSpec{{"Protein"}, 0, 1};
    s.events["Binding"] = binding;
    s.modifiers = {"Negation"};
  } else {
    RelationTypeSpec r;
    r.arg1_types = {"Protein"};
    r.arg2_types = {"Protein"};
    r.directed = false;
    s.relations[spec.relation_type] = r;
  }
  s.validate();
  return s;
}

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  SynthCorpus corpus;
  corpus.schema = synth_schema(spec);
  std::mt19937_64 rng(spec.seed);
  const std::size_t width = std::to_string(spec.documents).size();

  for (std::size_t d = 0; d < spec.documents; ++d) {
    Document doc;
    std::string num = std::to_string(d);
    doc.id = "synth-" + std::string(width - num.size(), '0') + num;
    std::vector<Node> entities, triggers;
    std::vector<Event> events;
    std::vector<Relation> relations;
    struct Pending {
      std::size_t e1, e2;
      std::optional<std::size_t> trigger;
      bool negated;
    };
    std::vector<Pending> pending;

    for (std::size_t s = 0; s < spec.sentences_per_doc; ++s) {
      Planted p = plant(spec, rng);
      std::vector<std::size_t> begins;
      for (std::size_t i = 0; i < p.tokens.size(); ++i) {
        if (i) doc.text += ' ';
        begins.push_back(doc.text.size());
        doc.text += p.tokens[i];
      }
      doc.text += '\n';
      auto node = [&](std::size_t tok, NodeKind kind, const std::string& type) {
        Node n;
        n.kind = kind;
        n.type = type;
        n.spans = {{begins[tok], begins[tok] + p.tokens[tok].size()}};
        n.surface = p.tokens[tok];
        n.given = kind == NodeKind::kEntity;
        return n;
      };
      entities.push_back(node(p.e1, NodeKind::kEntity, "Protein"));
      entities.push_back(node(p.e2, NodeKind::kEntity, "Protein"));
      if (!p.positive) continue;
      Pending item{entities.size() - 2, entities.size() - 1, std::nullopt, p.negated};
      if (spec.events) {
        item.trigger = triggers.size();
        triggers.push_back(node(p.trigger, NodeKind::kTrigger, "Binding"));
      }
      pending.push_back(item);
    }

    std::size_t t = 0;
    for (auto& n : entities) n.id = "T" + std::to_string(++t);
    for (auto& n : triggers) n.id = "T" + std::to_string(++t);
    std::size_t m = 0;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      const Pending& item = pending[i];
      if (item.trigger) {
        Event e;
        e.id = "E" + std::to_string(i + 1);
        e.type = "Binding";
        e.trigger = triggers[*item.trigger].id;
        e.args = {{"Theme", entities[item.e1].id}, {"Theme2", entities[item.e2].id}};
        if (item.negated) e.negation_id = "M" + std::to_string(++m);
        events.push_back(std::move(e));
      } else {
        relations.push_back({"R" + std::to_string(i + 1), spec.relation_type,
                             {"Arg1", entities[item.e1].id}, {"Arg2", entities[item.e2].id}});
      }
    }
    doc.graph.nodes = std::move(entities);
    doc.graph.nodes.insert(doc.graph.nodes.end(), triggers.begin(), triggers.end());
    doc.graph.events = std::move(events);
    doc.graph.relations = std::move(relations);
    doc.graph.validate(doc.text);
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

void write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus) {
  std::filesystem::create_directories(dir);
  std::ostringstream tsv;
  for (const auto& doc : corpus.documents) {
    save_document(dir, doc);
    write_relation_tsv(tsv, relation_rows(doc));
  }
  write_file(dir / "schema.json", schema_to_json(corpus.schema));
  write_file(dir / "relations.tsv", tsv.str());
}

std::vector<SynthSpec> distance_sweep_suite(const SynthSpec& base) {
  std::vector<SynthSpec> out;
  for (std::size_t d : {2, 8, 16, 32}) {
    SynthSpec s = base;
    s.min_distance = d;
    s.max_distance = d;
    out.push_back(s);
  }
  return out;
}

}  // namespace attnie
