#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace attnie {

class TaskSchema;

// Half-open byte range into the document text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

enum class NodeKind { kEntity, kTrigger };

// An entity or trigger mention.
struct Node {
  std::string id;
  NodeKind kind = NodeKind::kEntity;
  std::string type;
  std::vector<Span> spans;
  std::string surface;
  bool given = false;  // read from the .a1 file

  std::size_t begin() const;
  std::size_t end() const;
  bool is_trigger() const { return kind == NodeKind::kTrigger; }
};

// An event argument or relation argument. `target` names a node or event.
struct Argument {
  std::string role;
  std::string target;
  friend bool operator==(const Argument&, const Argument&) = default;
};

// A trigger plus its outgoing arguments. A non-empty modifier id means the
// flag is set; the id is what the .a2 line carries.
struct Event {
  std::string id;
  std::string type;
  std::string trigger;
  std::vector<Argument> args;
  std::string negation_id;
  std::string speculation_id;

  bool negated() const { return !negation_id.empty(); }
  bool speculated() const { return !speculation_id.empty(); }
};

struct Relation {
  std::string id;
  std::string type;
  Argument arg1;
  Argument arg2;
};

// Typed directed edge between two nodes.
struct Edge {
  std::string source;
  std::string target;
  std::string type;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct EventGraph {
  std::vector<Node> nodes;
  std::vector<Event> events;
  std::vector<Relation> relations;

  const Node* find_node(std::string_view id) const;
  const Event* find_event(std::string_view id) const;
  Node* find_node(std::string_view id);
  Event* find_event(std::string_view id);

  // Node an argument points at: the target node itself, or the trigger
  // of the target event. Empty when the target does not exist.
  std::string argument_node(std::string_view target) const;

  // Event arguments become trigger->node edges typed with the base role;
  // relations become arg1->arg2 edges typed with the relation type.
  std::vector<Edge> edges() const;

  // Indices into `events` so that nested events precede their parents.
  // Ties keep file order. Throws IntegrityError when nesting is cyclic.
  std::vector<std::size_t> event_order() const;

  // Checks referential integrity, self-loops, spans against `text` (when
  // non-empty) and acyclicity. Throws IntegrityError / ReferenceError.
  void validate(std::string_view text = {}) const;
};

// Role name without a trailing sequence number: "Theme2" -> "Theme".
std::string base_role(std::string_view role);

// Order-independent description of a graph: one string per node, event,
// relation and modifier, sorted. Relations of types the schema marks
// undirected compare without regard to argument order.
std::vector<std::string> canonical_form(const EventGraph& graph,
                                        const TaskSchema* schema = nullptr);
bool isomorphic(const EventGraph& a, const EventGraph& b,
                const TaskSchema* schema = nullptr);

// Canonical strings for single items, shared with evaluation.
std::string node_key(const Node& node);
std::string event_key(const EventGraph& graph, const Event& event);
std::string relation_key(const EventGraph& graph, const Relation& relation,
                         bool undirected);

// Annotation id ordering: by prefix letter, then numerically.
bool id_less(std::string_view a, std::string_view b);
// Numeric part of an id such as "T12"; 0 when absent.
std::size_t id_number(std::string_view id);

// Raw text plus its annotation graph.
struct Document {
  std::string id;
  std::string text;
  EventGraph graph;
};

}  // namespace attnie
