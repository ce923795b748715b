#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "attnie/event_graph.h"

namespace attnie {

// Allowed targets and arity for one argument role. Targets are entity
// types, event types, or "Event" for any event.
struct RoleSpec {
  std::vector<std::string> targets;
  std::size_t min = 0;
  std::size_t max = 1;
};

struct EventTypeSpec {
  std::map<std::string, RoleSpec> roles;
};

struct RelationTypeSpec {
  std::string arg1_role = "Arg1";
  std::string arg2_role = "Arg2";
  std::vector<std::string> arg1_types;
  std::vector<std::string> arg2_types;
  bool directed = true;
};

// Per-corpus description of what can be annotated. Loaded from JSON:
//   {"name": "...", "given_entities": true,
//    "entities": ["Protein"],
//    "events": {"Binding": {"roles": {"Theme": {"targets": ["Protein"],
//                                               "min": 1, "max": 1}}}},
//    "relations": {"Equiv": {"roles": ["Arg1","Arg2"], "arg1": ["Protein"],
//                            "arg2": ["Protein"], "directed": false}},
//    "modifiers": ["Negation", "Speculation"]}
class TaskSchema {
 public:
  std::string name;
  bool given_entities = true;
  std::vector<std::string> entity_types;
  std::map<std::string, EventTypeSpec> events;
  std::map<std::string, RelationTypeSpec> relations;
  std::vector<std::string> modifiers;

  bool is_event_type(std::string_view type) const;
  bool is_entity_type(std::string_view type) const;
  bool is_relation_type(std::string_view type) const;
  NodeKind kind_of(std::string_view type) const;

  const RoleSpec* role(std::string_view event_type, std::string_view role) const;
  // Whether `role` of `event_type` may point at a node of `target_type`.
  bool role_accepts(std::string_view event_type, std::string_view role,
                    const Node& target) const;
  // Whether any (possibly numbered) role with this base name accepts it.
  bool base_role_accepts(std::string_view event_type, std::string_view base,
                         const Node& target) const;
  // Whether a relation of `type` may link source -> target. Undirected
  // types accept either orientation.
  bool relation_accepts(std::string_view type, const Node& source,
                        const Node& target) const;
  // True when a role name of the event type may repeat without numbering.
  bool role_repeats(std::string_view event_type, std::string_view base) const;

  // Label inventories of the four stages, sorted.
  std::vector<std::string> node_labels() const;
  std::vector<std::string> edge_labels() const;
  std::vector<std::string> event_labels() const;
  std::vector<std::string> modifier_labels() const;

  bool has_events() const { return !events.empty(); }
  // Throws ConfigError for unknown role references or zero arities.
  void validate() const;
};

TaskSchema parse_schema(std::string_view json_text);
TaskSchema load_schema(const std::filesystem::path& path);
std::string schema_to_json(const TaskSchema& schema);

}  // namespace attnie
