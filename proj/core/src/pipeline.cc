#include "attnie/pipeline.h"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "attnie/errors.h"

namespace attnie {
namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);
constexpr std::size_t kMaxExpansions = 1024;

using EdgeKey = std::tuple<std::string, std::string, std::string>;

bool overlaps(std::size_t b1, std::size_t e1, std::size_t b2, std::size_t e2) {
  return b1 < e2 && b2 < e1;
}

bool node_before(const Node& a, const Node& b) {
  if (a.begin() != b.begin()) return a.begin() < b.begin();
  if (a.end() != b.end()) return a.end() < b.end();
  return id_less(a.id, b.id);
}

std::size_t next_id(const EventGraph& g, char prefix) {
  std::size_t n = 0;
  auto bump = [&](const std::string& id) {
    if (!id.empty() && id[0] == prefix) n = std::max(n, id_number(id));
  };
  for (const auto& x : g.nodes) bump(x.id);
  for (const auto& x : g.events) {
    bump(x.id);
    bump(x.negation_id);
    bump(x.speculation_id);
  }
  for (const auto& x : g.relations) bump(x.id);
  return n + 1;
}

Anchor anchor_for(const PreparedDocument& doc, const Node& node, Role role) {
  auto [b, e] = doc.tokens_of(node);
  return Anchor{b, e, role};
}

std::set<EdgeKey> gold_edge_keys(const EventGraph& gold, const TaskSchema& schema) {
  std::set<EdgeKey> out;
  for (const auto& e : gold.edges()) {
    const Node* s = gold.find_node(e.source);
    const Node* t = gold.find_node(e.target);
    if (!s || !t) continue;
    out.emplace(node_key(*s), node_key(*t), e.type);
    auto it = schema.relations.find(e.type);
    if (it != schema.relations.end() && !it->second.directed) {
      out.emplace(node_key(*t), node_key(*s), e.type);
    }
  }
  return out;
}

// Trigger key plus the sorted (base role, argument node) pairs.
std::string event_signature(const EventGraph& g, const std::string& trigger,
                            const std::vector<Argument>& args) {
  const Node* t = g.find_node(trigger);
  std::string out = t ? node_key(*t) : trigger;
  std::vector<std::string> parts;
  for (const auto& a : args) {
    const Node* n = g.find_node(g.argument_node(a.target));
    parts.push_back(base_role(a.role) + "=" + (n ? node_key(*n) : a.target));
  }
  std::sort(parts.begin(), parts.end());
  for (const auto& p : parts) out += "|" + p;
  return out;
}

bool pair_label_valid(const TaskSchema& schema, const Node& source, const Node& target,
                      const std::string& label, bool source_first) {
  if (!edge_label_valid(schema, source, target, label)) return false;
  auto it = schema.relations.find(label);
  if (it != schema.relations.end() && !it->second.directed) return source_first;
  return true;
}

Confidences predict(const StagePredictor& predictor, Stage stage,
                    const std::vector<EncodedExample>& examples, std::size_t labels) {
  if (examples.empty()) return {};
  Confidences c = predictor(stage, examples);
  if (c.size() != examples.size()) {
    throw ContractError(stage_name(stage) + " predictor returned " +
                        std::to_string(c.size()) + " rows for " +
                        std::to_string(examples.size()) + " examples");
  }
  for (const auto& row : c) {
    if (row.size() != labels) {
      throw ContractError(stage_name(stage) + " predictor returned " +
                          std::to_string(row.size()) + " labels, expected " +
                          std::to_string(labels));
    }
  }
  return c;
}

void note(DecodeReport* report, std::string reason) {
  if (report) report->dropped.push_back(std::move(reason));
}

}  // namespace

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::kNodes: return "nodes";
    case Stage::kEdges: return "edges";
    case Stage::kEvents: return "events";
    case Stage::kModifiers: return "modifiers";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : kStages) {
    if (stage_name(s) == name) return s;
  }
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

double PipelineOptions::threshold_for(Stage stage) const {
  const auto& o = stage_thresholds[static_cast<std::size_t>(stage)];
  return o ? *o : threshold;
}

EncodedExample ExampleEncoder::encode(const std::vector<std::string>& words,
                                      const std::vector<Anchor>& anchors,
                                      std::vector<double> labels,
                                      std::size_t sentence) const {
  if (!vocab) throw ContractError("encoder has no vocabulary");
  EncodedExample ex = encode_example(words, anchors, std::move(labels), *vocab, features);
  ex.sentence = sentence;
  return ex;
}

std::size_t PreparedDocument::sentence_of(const Node& node) const {
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (overlaps(node.begin(), node.end(), sentences[i].begin, sentences[i].end)) return i;
  }
  return kNone;
}

std::pair<std::size_t, std::size_t> PreparedDocument::tokens_of(const Node& node) const {
  std::size_t s = sentence_of(node);
  if (s == kNone) return {0, 0};
  return token_range(sentences[s], node.begin(), node.end());
}

PreparedDocument prepare_document(const Document& doc) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const auto& n : doc.graph.nodes) spans.emplace_back(n.begin(), n.end());
  PreparedDocument p;
  p.document = &doc;
  p.sentences = split_sentences(doc.text, spans);
  for (const auto& s : p.sentences) {
    std::vector<std::string> w;
    for (const auto& t : s.tokens) w.push_back(t.text);
    p.words.push_back(std::move(w));
  }
  return p;
}

StageExamples<NodeCandidate> gen_node_examples(const PreparedDocument& doc,
                                               std::size_t sentence,
                                               const TaskSchema& schema,
                                               const ExampleEncoder& encoder,
                                               const EventGraph* gold) {
  const std::vector<std::string> labels = schema.node_labels();
  const Sentence& sent = doc.sentences.at(sentence);
  StageExamples<NodeCandidate> out;
  for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
    std::vector<double> y(labels.size(), 0.0);
    if (gold) {
      const Token& tok = sent.tokens[i];
      for (const auto& n : gold->nodes) {
        auto it = std::lower_bound(labels.begin(), labels.end(), n.type);
        if (it == labels.end() || *it != n.type) continue;
        for (const auto& s : n.spans) {
          if (overlaps(tok.begin, tok.end, s.begin, s.end)) {
            y[it - labels.begin()] = 1.0;
          }
        }
      }
    }
    std::vector<Anchor> anchors{{i, i + 1, Role::kEntity1}};
    out.examples.push_back(encoder.encode(doc.words[sentence], anchors, std::move(y), sentence));
    out.candidates.push_back({sentence, i});
  }
  return out;
}

bool edge_label_valid(const TaskSchema& schema, const Node& source, const Node& target,
                      std::string_view label) {
  if (source.id == target.id) return false;
  if (schema.is_relation_type(label)) return schema.relation_accepts(label, source, target);
  return source.is_trigger() && schema.base_role_accepts(source.type, label, target);
}

StageExamples<EdgeCandidate> gen_edge_examples(const PreparedDocument& doc,
                                               std::size_t sentence,
                                               const EventGraph& graph,
                                               const TaskSchema& schema,
                                               const ExampleEncoder& encoder,
                                               const EventGraph* gold) {
  const std::vector<std::string> labels = schema.edge_labels();
  std::vector<const Node*> nodes;
  for (const auto& n : graph.nodes) {
    auto [b, e] = doc.tokens_of(n);
    if (b < e && doc.sentence_of(n) == sentence) nodes.push_back(&n);
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const Node* a, const Node* b) { return node_before(*a, *b); });
  std::set<EdgeKey> gold_keys;
  if (gold) gold_keys = gold_edge_keys(*gold, schema);

  StageExamples<EdgeCandidate> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (i == j) continue;
      const Node& s = *nodes[i];
      const Node& t = *nodes[j];
      bool any = false;
      std::vector<double> y(labels.size(), 0.0);
      for (std::size_t k = 0; k < labels.size(); ++k) {
        if (!pair_label_valid(schema, s, t, labels[k], i < j)) continue;
        any = true;
        if (gold_keys.count({node_key(s), node_key(t), labels[k]})) y[k] = 1.0;
      }
      if (!any) continue;
      std::vector<Anchor> anchors{
          anchor_for(doc, s, s.is_trigger() ? Role::kTrigger : Role::kEntity1),
          anchor_for(doc, t, t.is_trigger() ? Role::kArgument : Role::kEntity2)};
      out.examples.push_back(encoder.encode(doc.words[sentence], anchors, std::move(y), sentence));
      out.candidates.push_back({s.id, t.id, sentence});
    }
  }
  return out;
}

std::vector<std::vector<Argument>> enumerate_argument_sets(
    const Node& trigger, const std::vector<Edge>& outgoing, const EventGraph& graph,
    const TaskSchema& schema, std::size_t max_args, std::size_t cap, bool* truncated) {
  if (truncated) *truncated = false;
  std::vector<std::vector<Argument>> out;
  auto type_it = schema.events.find(trigger.type);
  if (type_it == schema.events.end()) return out;
  const EventTypeSpec& spec = type_it->second;

  struct Item {
    const Node* node;
    std::string role;
  };
  std::vector<Item> items;
  for (const auto& e : outgoing) {
    if (e.source != trigger.id || schema.is_relation_type(e.type)) continue;
    const Node* n = graph.find_node(e.target);
    if (!n || n->id == trigger.id) continue;
    items.push_back({n, e.type});
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.node->id != b.node->id) return node_before(*a.node, *b.node);
    return a.role < b.role;
  });
  items.erase(std::unique(items.begin(), items.end(),
                          [](const Item& a, const Item& b) {
                            return a.node->id == b.node->id && a.role == b.role;
                          }),
              items.end());

  auto accept = [&](const std::vector<std::size_t>& pick) -> bool {
    std::vector<Argument> args;
    std::map<std::string, std::size_t> seen_base;
    std::map<std::string, std::size_t> per_role;
    std::set<std::string> targets;
    for (std::size_t idx : pick) {
      const Item& it = items[idx];
      if (!targets.insert(it.node->id).second) return false;
      std::string name = it.role;
      std::size_t k = seen_base[it.role]++;
      if (!schema.role_repeats(trigger.type, it.role) && k > 0) {
        name = it.role + std::to_string(k + 1);
      }
      if (!schema.role_accepts(trigger.type, name, *it.node)) return false;
      if (++per_role[name] > schema.role(trigger.type, name)->max) return false;
      args.push_back({name, it.node->id});
    }
    for (const auto& [name, r] : spec.roles) {
      if (per_role[name] < r.min) return false;
    }
    out.push_back(std::move(args));
    return true;
  };

  const std::size_t limit = std::min(max_args, items.size());
  for (std::size_t k = 0; k <= limit; ++k) {
    std::vector<std::size_t> pick(k);
    for (std::size_t i = 0; i < k; ++i) pick[i] = i;
    while (true) {
      accept(pick);
      if (out.size() >= cap) {
        if (truncated) *truncated = true;
        return out;
      }
      // next combination in lexicographic order
      std::size_t i = k;
      while (i > 0 && pick[i - 1] == items.size() - k + i - 1) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
  }
  return out;
}

StageExamples<EventCandidate> gen_event_candidates(
    const PreparedDocument& doc, const Node& trigger, const std::vector<Edge>& outgoing,
    const EventGraph& graph, const TaskSchema& schema, const ExampleEncoder& encoder,
    const EventGraph* gold, const PipelineOptions& options, bool* truncated) {
  StageExamples<EventCandidate> out;
  const std::size_t sentence = doc.sentence_of(trigger);
  if (sentence == kNone) return out;
  auto sets = enumerate_argument_sets(trigger, outgoing, graph, schema, options.max_args,
                                      options.max_candidates, truncated);
  std::set<std::string> gold_sigs;
  if (gold) {
    for (const auto& e : gold->events) {
      gold_sigs.insert(event_signature(*gold, e.trigger, e.args));
    }
  }
  for (auto& args : sets) {
    std::vector<Anchor> anchors{anchor_for(doc, trigger, Role::kTrigger)};
    for (const auto& a : args) {
      anchors.push_back(anchor_for(doc, *graph.find_node(a.target), Role::kArgument));
    }
    double y = gold && gold_sigs.count(event_signature(graph, trigger.id, args)) ? 1.0 : 0.0;
    out.examples.push_back(encoder.encode(doc.words[sentence], anchors, {y}, sentence));
    out.candidates.push_back({trigger.id, std::move(args), sentence});
  }
  return out;
}

StageExamples<ModifierCandidate> gen_modifier_examples(const PreparedDocument& doc,
                                                       const EventGraph& graph,
                                                       const TaskSchema& schema,
                                                       const ExampleEncoder& encoder,
                                                       const EventGraph* gold) {
  const std::vector<std::string> labels = schema.modifier_labels();
  std::map<std::string, std::pair<bool, bool>> gold_flags;
  if (gold) {
    for (const auto& e : gold->events) {
      auto& f = gold_flags[event_key(*gold, e)];
      f.first = f.first || e.negated();
      f.second = f.second || e.speculated();
    }
  }
  StageExamples<ModifierCandidate> out;
  for (const auto& e : graph.events) {
    const Node* trig = graph.find_node(e.trigger);
    if (!trig) continue;
    const std::size_t sentence = doc.sentence_of(*trig);
    if (sentence == kNone) continue;
    std::vector<Anchor> anchors{anchor_for(doc, *trig, Role::kTrigger)};
    for (const auto& a : e.args) {
      const Node* n = graph.find_node(graph.argument_node(a.target));
      if (n && doc.sentence_of(*n) == sentence) {
        anchors.push_back(anchor_for(doc, *n, Role::kArgument));
      }
    }
    std::vector<double> y(labels.size(), 0.0);
    auto it = gold_flags.find(event_key(graph, e));
    if (it != gold_flags.end()) {
      for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k] == "Negation" && it->second.first) y[k] = 1.0;
        if (labels[k] == "Speculation" && it->second.second) y[k] = 1.0;
      }
    }
    out.examples.push_back(encoder.encode(doc.words[sentence], anchors, std::move(y), sentence));
    out.candidates.push_back({e.id, sentence});
  }
  return out;
}

Confidences project_labels(Stage, const std::vector<EncodedExample>& examples) {
  Confidences out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(ex.labels);
  return out;
}

void decode_nodes(EventGraph& graph, const PreparedDocument& doc,
                  const StageExamples<NodeCandidate>& batch, const Confidences& confidences,
                  const TaskSchema& schema, double threshold) {
  const std::vector<std::string> labels = schema.node_labels();
  const std::string& text = doc.document->text;
  std::size_t next = next_id(graph, 'T');
  for (std::size_t k = 0; k < labels.size(); ++k) {
    std::size_t i = 0;
    while (i < batch.candidates.size()) {
      if (confidences[i][k] < threshold) {
        ++i;
        continue;
      }
      std::size_t j = i + 1;
      while (j < batch.candidates.size() && confidences[j][k] >= threshold &&
             batch.candidates[j].sentence == batch.candidates[i].sentence &&
             batch.candidates[j].token == batch.candidates[j - 1].token + 1) {
        ++j;
      }
      const Sentence& sent = doc.sentences[batch.candidates[i].sentence];
      const std::size_t b = sent.tokens[batch.candidates[i].token].begin;
      const std::size_t e = sent.tokens[batch.candidates[j - 1].token].end;
      bool exists = std::any_of(graph.nodes.begin(), graph.nodes.end(), [&](const Node& n) {
        return n.type == labels[k] && n.spans.size() == 1 && n.spans[0] == Span{b, e};
      });
      if (!exists) {
        Node n;
        n.id = "T" + std::to_string(next++);
        n.kind = schema.kind_of(labels[k]);
        n.type = labels[k];
        n.spans = {{b, e}};
        n.surface = text.substr(b, e - b);
        graph.nodes.push_back(std::move(n));
      }
      i = j;
    }
  }
}

std::vector<Edge> decode_edges(const EventGraph& graph,
                               const StageExamples<EdgeCandidate>& batch,
                               const Confidences& confidences, const TaskSchema& schema,
                               double threshold, DecodeReport* report) {
  const std::vector<std::string> labels = schema.edge_labels();
  std::vector<Edge> out;
  for (std::size_t i = 0; i < batch.candidates.size(); ++i) {
    const EdgeCandidate& c = batch.candidates[i];
    for (std::size_t k = 0; k < labels.size(); ++k) {
      if (confidences[i][k] < threshold) continue;
      const Node* s = graph.find_node(c.source);
      const Node* t = graph.find_node(c.target);
      if (!s || !t) {
        note(report, "edge " + c.source + "->" + c.target + " " + labels[k] +
                         ": endpoint missing");
        continue;
      }
      if (!edge_label_valid(schema, *s, *t, labels[k])) {
        note(report, "edge " + c.source + "->" + c.target + " " + labels[k] +
                         ": not allowed by the schema");
        continue;
      }
      out.push_back({c.source, c.target, labels[k]});
    }
  }
  return out;
}

void decode_events(EventGraph& graph, const std::vector<EventCandidate>& accepted,
                   DecodeReport* report) {
  // Triggers with accepted candidates, in node order, and their dependencies.
  std::map<std::string, std::vector<const EventCandidate*>> protos;
  for (const auto& c : accepted) {
    const Node* t = graph.find_node(c.trigger);
    if (!t || !t->is_trigger()) {
      note(report, "event candidate on " + c.trigger + ": trigger missing");
      continue;
    }
    protos[c.trigger].push_back(&c);
  }
  std::vector<std::string> order;
  for (const auto& n : graph.nodes) {
    if (protos.count(n.id)) order.push_back(n.id);
  }
  std::map<std::string, std::set<std::string>> deps;
  for (const auto& [trig, list] : protos) {
    for (const auto* c : list) {
      for (const auto& a : c->args) {
        const Node* n = graph.find_node(a.target);
        if (n && n->is_trigger()) deps[trig].insert(a.target);
      }
    }
  }
  std::set<std::string> done;
  std::vector<std::string> resolved;
  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& trig : order) {
      if (done.count(trig)) continue;
      bool ready = std::all_of(deps[trig].begin(), deps[trig].end(), [&](const std::string& d) {
        return done.count(d) || !protos.count(d);
      });
      if (!ready) continue;
      done.insert(trig);
      resolved.push_back(trig);
      progress = true;
      break;
    }
  }
  for (const auto& trig : order) {
    if (!done.count(trig)) note(report, "events on " + trig + ": cyclic nesting");
  }

  std::map<std::string, std::vector<std::string>> events_of;
  std::size_t next = next_id(graph, 'E');
  for (const auto& trig : resolved) {
    const Node* t = graph.find_node(trig);
    const std::string type = t->type;
    for (const auto* c : protos[trig]) {
      std::vector<std::vector<std::string>> options;
      bool ok = true;
      for (const auto& a : c->args) {
        const Node* n = graph.find_node(a.target);
        if (!n) {
          ok = false;
          note(report, "event on " + trig + ": argument " + a.target + " missing");
          break;
        }
        if (!n->is_trigger()) {
          options.push_back({a.target});
          continue;
        }
        auto it = events_of.find(a.target);
        if (it == events_of.end() || it->second.empty()) {
          ok = false;
          note(report, "event on " + trig + ": nested trigger " + a.target + " has no event");
          break;
        }
        options.push_back(it->second);
      }
      if (!ok) continue;
      std::vector<std::size_t> pick(options.size(), 0);
      for (std::size_t made = 0; made < kMaxExpansions; ++made) {
        Event e;
        e.id = "E" + std::to_string(next++);
        e.type = type;
        e.trigger = trig;
        for (std::size_t i = 0; i < options.size(); ++i) {
          e.args.push_back({c->args[i].role, options[i][pick[i]]});
        }
        events_of[trig].push_back(e.id);
        graph.events.push_back(std::move(e));
        std::size_t i = options.size();
        while (i > 0 && ++pick[i - 1] == options[i - 1].size()) pick[--i] = 0;
        if (i == 0) break;
      }
    }
  }
}

void decode_modifiers(EventGraph& graph, const StageExamples<ModifierCandidate>& batch,
                      const Confidences& confidences, const TaskSchema& schema,
                      double threshold) {
  const std::vector<std::string> labels = schema.modifier_labels();
  std::size_t next = next_id(graph, 'M');
  for (std::size_t i = 0; i < batch.candidates.size(); ++i) {
    Event* e = graph.find_event(batch.candidates[i].event);
    if (!e) continue;
    for (std::size_t k = 0; k < labels.size(); ++k) {
      if (confidences[i][k] < threshold) continue;
      std::string& slot = labels[k] == "Negation" ? e->negation_id : e->speculation_id;
      if (slot.empty()) slot = "M" + std::to_string(next++);
    }
  }
}

void finish_graph(EventGraph& graph, const std::vector<Edge>& edges,
                  const TaskSchema& schema, DecodeReport* report) {
  std::size_t next = next_id(graph, 'R');
  for (const auto& e : edges) {
    auto it = schema.relations.find(e.type);
    if (it == schema.relations.end()) continue;
    const Node* s = graph.find_node(e.source);
    const Node* t = graph.find_node(e.target);
    if (!s || !t) continue;
    const RelationTypeSpec& spec = it->second;
    auto has = [](const std::vector<std::string>& v, const std::string& x) {
      return std::find(v.begin(), v.end(), x) != v.end();
    };
    if (!(has(spec.arg1_types, s->type) && has(spec.arg2_types, t->type))) std::swap(s, t);
    bool dup = std::any_of(graph.relations.begin(), graph.relations.end(), [&](const Relation& r) {
      return r.type == e.type && r.arg1.target == s->id && r.arg2.target == t->id;
    });
    if (dup) continue;
    graph.relations.push_back({"R" + std::to_string(next++), e.type,
                               {spec.arg1_role, s->id}, {spec.arg2_role, t->id}});
  }

  std::set<std::string> used;
  for (const auto& e : graph.events) used.insert(e.trigger);
  std::set<std::string> removed;
  std::erase_if(graph.nodes, [&](const Node& n) {
    if (!n.is_trigger() || used.count(n.id)) return false;
    note(report, "trigger " + n.id + " (" + n.type + "): no event");
    removed.insert(n.id);
    return true;
  });
  std::erase_if(graph.relations, [&](const Relation& r) {
    if (!removed.count(r.arg1.target) && !removed.count(r.arg2.target)) return false;
    note(report, "relation " + r.id + ": endpoint removed");
    return true;
  });
}

Document strip_predictions(const Document& doc) {
  Document out;
  out.id = doc.id;
  out.text = doc.text;
  for (const auto& n : doc.graph.nodes) {
    if (n.given) out.graph.nodes.push_back(n);
  }
  return out;
}

std::vector<std::string> stage_labels(const TaskSchema& schema, Stage stage) {
  switch (stage) {
    case Stage::kNodes: return schema.node_labels();
    case Stage::kEdges: return schema.edge_labels();
    case Stage::kEvents: return schema.event_labels();
    case Stage::kModifiers: return schema.modifier_labels();
  }
  return {};
}

EventGraph run_pipeline(const Document& input, const TaskSchema& schema,
                        const ExampleEncoder& encoder, const StagePredictor& predictor,
                        const PipelineOptions& options, const EventGraph* gold,
                        DecodeReport* report) {
  const Document base = strip_predictions(input);
  const PreparedDocument doc = prepare_document(base);
  EventGraph graph = base.graph;

  const auto node_labels = schema.node_labels();
  if (!node_labels.empty()) {
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      auto batch = gen_node_examples(doc, s, schema, encoder, gold);
      auto conf = predict(predictor, Stage::kNodes, batch.examples, node_labels.size());
      decode_nodes(graph, doc, batch, conf, schema, options.threshold_for(Stage::kNodes));
    }
  }

  std::vector<Edge> edges;
  const auto edge_labels = schema.edge_labels();
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    auto batch = gen_edge_examples(doc, s, graph, schema, encoder, gold);
    auto conf = predict(predictor, Stage::kEdges, batch.examples, edge_labels.size());
    auto found = decode_edges(graph, batch, conf, schema, options.threshold_for(Stage::kEdges),
                              report);
    edges.insert(edges.end(), found.begin(), found.end());
  }

  if (schema.has_events()) {
    std::vector<EventCandidate> accepted;
    const double t = options.threshold_for(Stage::kEvents);
    for (const auto& n : graph.nodes) {
      if (!n.is_trigger()) continue;
      bool truncated = false;
      auto batch = gen_event_candidates(doc, n, edges, graph, schema, encoder, gold, options,
                                        &truncated);
      if (truncated && report) ++report->truncated_triggers;
      auto conf = predict(predictor, Stage::kEvents, batch.examples, 1);
      for (std::size_t i = 0; i < conf.size(); ++i) {
        if (conf[i][0] >= t) accepted.push_back(std::move(batch.candidates[i]));
      }
    }
    decode_events(graph, accepted, report);
  }
  finish_graph(graph, edges, schema, report);

  const auto mod_labels = schema.modifier_labels();
  if (!mod_labels.empty() && !graph.events.empty()) {
    auto batch = gen_modifier_examples(doc, graph, schema, encoder, gold);
    auto conf = predict(predictor, Stage::kModifiers, batch.examples, mod_labels.size());
    decode_modifiers(graph, batch, conf, schema, options.threshold_for(Stage::kModifiers));
  }
  return graph;
}

PipelineDatasets training_examples(const std::vector<Document>& gold_docs,
                                   const TaskSchema& schema, const ExampleEncoder& encoder,
                                   const PipelineOptions& options,
                                   const StagePredictor* node_predictor) {
  PipelineDatasets out;
  for (Stage s : kStages) out[s].labels = stage_labels(schema, s);
  auto append = [](StageDataset& d, auto&& batch) {
    for (auto& ex : batch.examples) d.examples.push_back(std::move(ex));
  };

  for (const auto& doc : gold_docs) {
    const EventGraph& gold = doc.graph;
    const PreparedDocument prep = prepare_document(doc);
    if (!out[Stage::kNodes].labels.empty()) {
      for (std::size_t s = 0; s < prep.sentences.size(); ++s) {
        append(out[Stage::kNodes], gen_node_examples(prep, s, schema, encoder, &gold));
      }
    }

    EventGraph nodes = gold;
    if (!options.edges_on_gold_nodes && node_predictor &&
        !out[Stage::kNodes].labels.empty()) {
      nodes = strip_predictions(doc).graph;
      for (std::size_t s = 0; s < prep.sentences.size(); ++s) {
        auto batch = gen_node_examples(prep, s, schema, encoder, nullptr);
        auto conf = predict(*node_predictor, Stage::kNodes, batch.examples,
                            out[Stage::kNodes].labels.size());
        decode_nodes(nodes, prep, batch, conf, schema, options.threshold_for(Stage::kNodes));
      }
    }
    for (std::size_t s = 0; s < prep.sentences.size(); ++s) {
      append(out[Stage::kEdges], gen_edge_examples(prep, s, nodes, schema, encoder, &gold));
    }

    if (schema.has_events()) {
      std::vector<Edge> role_edges;
      for (const auto& e : gold.edges()) {
        if (!schema.is_relation_type(e.type)) role_edges.push_back(e);
      }
      for (const auto& n : gold.nodes) {
        if (!n.is_trigger()) continue;
        const std::size_t sentence = prep.sentence_of(n);
        std::vector<Edge> outgoing;
        for (const auto& e : role_edges) {
          const Node* t = gold.find_node(e.target);
          if (e.source == n.id && t && prep.sentence_of(*t) == sentence) outgoing.push_back(e);
        }
        bool truncated = false;
        append(out[Stage::kEvents], gen_event_candidates(prep, n, outgoing, gold, schema,
                                                         encoder, &gold, options, &truncated));
        if (truncated) ++out.truncated_triggers;
      }
    }
    if (!out[Stage::kModifiers].labels.empty()) {
      append(out[Stage::kModifiers], gen_modifier_examples(prep, gold, schema, encoder, &gold));
    }
  }
  return out;
}

}  // namespace attnie
