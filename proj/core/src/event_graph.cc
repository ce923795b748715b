#include "attnie/event_graph.h"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <queue>
#include <set>

#include "attnie/errors.h"
#include "attnie/schema.h"

namespace attnie {

std::size_t Node::begin() const {
  std::size_t b = spans.empty() ? 0 : spans.front().begin;
  for (const auto& s : spans) b = std::min(b, s.begin);
  return b;
}

std::size_t Node::end() const {
  std::size_t e = 0;
  for (const auto& s : spans) e = std::max(e, s.end);
  return e;
}

const Node* EventGraph::find_node(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const Event* EventGraph::find_event(std::string_view id) const {
  for (const auto& e : events) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

Node* EventGraph::find_node(std::string_view id) {
  return const_cast<Node*>(std::as_const(*this).find_node(id));
}

Event* EventGraph::find_event(std::string_view id) {
  return const_cast<Event*>(std::as_const(*this).find_event(id));
}

std::string EventGraph::argument_node(std::string_view target) const {
  if (find_node(target)) return std::string(target);
  if (const Event* e = find_event(target)) return e->trigger;
  return {};
}

std::vector<Edge> EventGraph::edges() const {
  std::vector<Edge> out;
  for (const auto& e : events) {
    for (const auto& a : e.args) {
      Edge edge{e.trigger, argument_node(a.target), base_role(a.role)};
      if (std::find(out.begin(), out.end(), edge) == out.end()) out.push_back(edge);
    }
  }
  for (const auto& r : relations) {
    Edge edge{argument_node(r.arg1.target), argument_node(r.arg2.target), r.type};
    if (std::find(out.begin(), out.end(), edge) == out.end()) out.push_back(edge);
  }
  return out;
}

std::vector<std::size_t> EventGraph::event_order() const {
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < events.size(); ++i) index.emplace(events[i].id, i);
  std::vector<std::size_t> pending(events.size(), 0);
  std::vector<std::vector<std::size_t>> parents(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    for (const auto& a : events[i].args) {
      auto it = index.find(a.target);
      if (it == index.end()) continue;
      ++pending[i];
      parents[it->second].push_back(i);
    }
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (pending[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    std::size_t i = ready.top();
    ready.pop();
    order.push_back(i);
    for (std::size_t p : parents[i]) {
      if (--pending[p] == 0) ready.push(p);
    }
  }
  if (order.size() != events.size()) {
    for (std::size_t i = 0; i < events.size(); ++i) {
      if (pending[i] != 0) throw IntegrityError("cyclic event nesting at " + events[i].id);
    }
  }
  return order;
}

void EventGraph::validate(std::string_view text) const {
  std::set<std::string, std::less<>> ids;
  auto claim = [&](const std::string& id) {
    if (id.empty()) throw IntegrityError("annotation without id");
    if (!ids.insert(id).second) throw IntegrityError("duplicate id " + id);
  };
  for (const auto& n : nodes) {
    claim(n.id);
    if (n.spans.empty()) throw IntegrityError(n.id + " has no span");
    for (const auto& s : n.spans) {
      if (s.begin >= s.end) throw IntegrityError(n.id + " has an empty span");
      if (!text.empty() && s.end > text.size()) {
        throw IntegrityError(n.id + " span exceeds the document text");
      }
    }
  }
  for (const auto& e : events) {
    claim(e.id);
    if (!e.negation_id.empty()) claim(e.negation_id);
    if (!e.speculation_id.empty()) claim(e.speculation_id);
  }
  for (const auto& r : relations) claim(r.id);

  for (const auto& e : events) {
    const Node* trig = find_node(e.trigger);
    if (!trig) throw ReferenceError(e.id + " references missing trigger " + e.trigger);
    if (trig->type != e.type) {
      throw IntegrityError(e.id + " type " + e.type + " differs from trigger type " +
                           trig->type);
    }
    for (const auto& a : e.args) {
      if (!find_node(a.target) && !find_event(a.target)) {
        throw ReferenceError(e.id + " references missing " + a.target);
      }
      if (a.target == e.trigger || a.target == e.id) {
        throw IntegrityError(e.id + " has a self-loop");
      }
    }
  }
  for (const auto& r : relations) {
    for (const auto* a : {&r.arg1, &r.arg2}) {
      if (!find_node(a->target) && !find_event(a->target)) {
        throw ReferenceError(r.id + " references missing " + a->target);
      }
    }
    if (r.arg1.target == r.arg2.target) throw IntegrityError(r.id + " has a self-loop");
  }
  event_order();
}

std::string base_role(std::string_view role) {
  std::size_t n = role.size();
  while (n > 0 && role[n - 1] >= '0' && role[n - 1] <= '9') --n;
  if (n == 0) n = role.size();
  return std::string(role.substr(0, n));
}

std::string node_key(const Node& node) {
  std::string out = node.is_trigger() ? "trigger:" : "entity:";
  out += node.type;
  out += '@';
  for (std::size_t i = 0; i < node.spans.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(node.spans[i].begin) + "-" + std::to_string(node.spans[i].end);
  }
  return out;
}

namespace {

std::string target_key(const EventGraph& g, std::string_view target, std::size_t depth);

std::string event_key_at(const EventGraph& g, const Event& e, std::size_t depth) {
  if (depth > g.events.size()) throw IntegrityError("cyclic event nesting at " + e.id);
  std::string out = "event:" + e.type + "|";
  const Node* trig = g.find_node(e.trigger);
  out += trig ? node_key(*trig) : "?" + e.trigger;
  std::vector<std::string> args;
  for (const auto& a : e.args) args.push_back(a.role + "=" + target_key(g, a.target, depth + 1));
  std::sort(args.begin(), args.end());
  for (const auto& a : args) out += "|" + a;
  return out;
}

std::string target_key(const EventGraph& g, std::string_view target, std::size_t depth) {
  if (const Node* n = g.find_node(target)) return node_key(*n);
  if (const Event* e = g.find_event(target)) return "(" + event_key_at(g, *e, depth) + ")";
  return "?" + std::string(target);
}

}  // namespace

std::string event_key(const EventGraph& graph, const Event& event) {
  return event_key_at(graph, event, 0);
}

std::string relation_key(const EventGraph& graph, const Relation& r, bool undirected) {
  std::string a = target_key(graph, r.arg1.target, 0);
  std::string b = target_key(graph, r.arg2.target, 0);
  if (undirected) {
    if (b < a) std::swap(a, b);
    return "relation:" + r.type + "|" + a + "|" + b;
  }
  return "relation:" + r.type + "|" + r.arg1.role + "=" + a + "|" + r.arg2.role + "=" + b;
}

std::vector<std::string> canonical_form(const EventGraph& graph, const TaskSchema* schema) {
  std::vector<std::string> out;
  for (const auto& n : graph.nodes) out.push_back(node_key(n));
  for (const auto& e : graph.events) {
    std::string key = event_key(graph, e);
    if (e.negated()) out.push_back("Negation|" + key);
    if (e.speculated()) out.push_back("Speculation|" + key);
    out.push_back(std::move(key));
  }
  for (const auto& r : graph.relations) {
    bool undirected = false;
    if (schema) {
      auto it = schema->relations.find(r.type);
      undirected = it != schema->relations.end() && !it->second.directed;
    }
    out.push_back(relation_key(graph, r, undirected));
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool isomorphic(const EventGraph& a, const EventGraph& b, const TaskSchema* schema) {
  return canonical_form(a, schema) == canonical_form(b, schema);
}

std::size_t id_number(std::string_view id) {
  std::size_t i = 0;
  while (i < id.size() && !(id[i] >= '0' && id[i] <= '9')) ++i;
  std::size_t value = 0;
  std::from_chars(id.data() + i, id.data() + id.size(), value);
  return value;
}

bool id_less(std::string_view a, std::string_view b) {
  auto prefix = [](std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && !(s[i] >= '0' && s[i] <= '9')) ++i;
    return s.substr(0, i);
  };
  auto pa = prefix(a), pb = prefix(b);
  if (pa != pb) return pa < pb;
  std::size_t na = id_number(a), nb = id_number(b);
  if (na != nb) return na < nb;
  return a < b;
}

}  // namespace attnie
