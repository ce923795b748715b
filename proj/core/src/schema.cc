#include "attnie/schema.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "attnie/errors.h"
#include "json.hpp"

namespace attnie {
namespace {

using json = nlohmann::json;

bool contains(const std::vector<std::string>& v, std::string_view s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::vector<std::string> string_list(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError("schema: " + what + " must be a list");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw ConfigError("schema: " + what + " holds a non-string");
    out.push_back(v.get<std::string>());
  }
  return out;
}

const std::vector<std::string>& known_modifiers() {
  static const std::vector<std::string> names{"Negation", "Speculation"};
  return names;
}

}  // namespace

bool TaskSchema::is_event_type(std::string_view type) const {
  return events.find(std::string(type)) != events.end();
}

bool TaskSchema::is_entity_type(std::string_view type) const {
  return contains(entity_types, type);
}

bool TaskSchema::is_relation_type(std::string_view type) const {
  return relations.find(std::string(type)) != relations.end();
}

NodeKind TaskSchema::kind_of(std::string_view type) const {
  return is_event_type(type) ? NodeKind::kTrigger : NodeKind::kEntity;
}

const RoleSpec* TaskSchema::role(std::string_view event_type,
                                 std::string_view role) const {
  auto it = events.find(std::string(event_type));
  if (it == events.end()) return nullptr;
  auto r = it->second.roles.find(std::string(role));
  return r == it->second.roles.end() ? nullptr : &r->second;
}

bool TaskSchema::role_accepts(std::string_view event_type, std::string_view role_name,
                              const Node& target) const {
  const RoleSpec* spec = role(event_type, role_name);
  if (!spec) return false;
  if (contains(spec->targets, target.type)) return true;
  return target.is_trigger() && contains(spec->targets, "Event");
}

bool TaskSchema::base_role_accepts(std::string_view event_type, std::string_view base,
                                   const Node& target) const {
  auto it = events.find(std::string(event_type));
  if (it == events.end()) return false;
  for (const auto& [name, spec] : it->second.roles) {
    if (base_role(name) == base && role_accepts(event_type, name, target)) return true;
  }
  return false;
}

bool TaskSchema::relation_accepts(std::string_view type, const Node& source,
                                  const Node& target) const {
  auto it = relations.find(std::string(type));
  if (it == relations.end()) return false;
  const RelationTypeSpec& r = it->second;
  if (contains(r.arg1_types, source.type) && contains(r.arg2_types, target.type)) {
    return true;
  }
  return !r.directed && contains(r.arg1_types, target.type) &&
         contains(r.arg2_types, source.type);
}

bool TaskSchema::role_repeats(std::string_view event_type, std::string_view base) const {
  const RoleSpec* spec = role(event_type, base);
  return spec && spec->max > 1;
}

std::vector<std::string> TaskSchema::node_labels() const {
  std::set<std::string> out;
  for (const auto& [name, spec] : events) out.insert(name);
  if (!given_entities) out.insert(entity_types.begin(), entity_types.end());
  return {out.begin(), out.end()};
}

std::vector<std::string> TaskSchema::edge_labels() const {
  std::set<std::string> out;
  for (const auto& [name, spec] : events) {
    for (const auto& [role_name, r] : spec.roles) out.insert(base_role(role_name));
  }
  for (const auto& [name, spec] : relations) out.insert(name);
  return {out.begin(), out.end()};
}

std::vector<std::string> TaskSchema::event_labels() const {
  if (events.empty()) return {};
  return {"Event"};
}

std::vector<std::string> TaskSchema::modifier_labels() const {
  std::vector<std::string> out = modifiers;
  std::sort(out.begin(), out.end());
  return out;
}

void TaskSchema::validate() const {
  std::set<std::string> seen;
  for (const auto& t : entity_types) {
    if (t.empty()) throw ConfigError("schema: empty entity type");
    if (!seen.insert(t).second) throw ConfigError("schema: duplicate type " + t);
  }
  for (const auto& [name, spec] : events) {
    if (!seen.insert(name).second) throw ConfigError("schema: duplicate type " + name);
  }
  for (const auto& [name, spec] : events) {
    for (const auto& [role_name, r] : spec.roles) {
      if (r.max < 1 || r.min > r.max) {
        throw ConfigError("schema: bad arity for " + name + "." + role_name);
      }
      if (r.targets.empty()) {
        throw ConfigError("schema: role " + name + "." + role_name + " has no targets");
      }
      for (const auto& t : r.targets) {
        if (t != "Event" && !is_entity_type(t) && !is_event_type(t)) {
          throw ConfigError("schema: role " + name + "." + role_name +
                            " references unknown type " + t);
        }
      }
    }
  }
  for (const auto& [name, r] : relations) {
    if (seen.count(name)) throw ConfigError("schema: relation " + name + " shadows a type");
    if (r.arg1_role.empty() || r.arg2_role.empty() || r.arg1_role == r.arg2_role) {
      throw ConfigError("schema: relation " + name + " needs two distinct roles");
    }
    for (const auto* list : {&r.arg1_types, &r.arg2_types}) {
      if (list->empty()) throw ConfigError("schema: relation " + name + " has no endpoints");
      for (const auto& t : *list) {
        if (!is_entity_type(t) && !is_event_type(t)) {
          throw ConfigError("schema: relation " + name + " references unknown type " + t);
        }
      }
    }
  }
  for (const auto& m : modifiers) {
    if (!contains(known_modifiers(), m)) throw ConfigError("schema: unknown modifier " + m);
  }
}

TaskSchema parse_schema(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("schema: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("schema: top level must be an object");
  TaskSchema s;
  try {
    s.name = j.value("name", "");
    s.given_entities = j.value("given_entities", true);
    if (j.contains("entities")) s.entity_types = string_list(j["entities"], "entities");
    if (j.contains("events")) {
      for (const auto& [name, body] : j["events"].items()) {
        EventTypeSpec spec;
        for (const auto& [role_name, r] : body.at("roles").items()) {
          RoleSpec rs;
          rs.targets = string_list(r.at("targets"), name + "." + role_name);
          rs.min = r.value("min", std::size_t{0});
          rs.max = r.value("max", std::size_t{1});
          spec.roles.emplace(role_name, std::move(rs));
        }
        s.events.emplace(name, std::move(spec));
      }
    }
    if (j.contains("relations")) {
      for (const auto& [name, body] : j["relations"].items()) {
        RelationTypeSpec r;
        if (body.contains("roles")) {
          auto roles = string_list(body["roles"], name + ".roles");
          if (roles.size() != 2) throw ConfigError("schema: relation " + name + " needs two roles");
          r.arg1_role = roles[0];
          r.arg2_role = roles[1];
        }
        r.arg1_types = string_list(body.at("arg1"), name + ".arg1");
        r.arg2_types = string_list(body.at("arg2"), name + ".arg2");
        r.directed = body.value("directed", true);
        s.relations.emplace(name, std::move(r));
      }
    }
    if (j.contains("modifiers")) s.modifiers = string_list(j["modifiers"], "modifiers");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schema: ") + e.what());
  }
  s.validate();
  return s;
}

TaskSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open schema " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_schema(buf.str());
}

std::string schema_to_json(const TaskSchema& s) {
  json j;
  j["name"] = s.name;
  j["given_entities"] = s.given_entities;
  j["entities"] = s.entity_types;
  j["events"] = json::object();
  for (const auto& [name, spec] : s.events) {
    json roles = json::object();
    for (const auto& [role_name, r] : spec.roles) {
      roles[role_name] = {{"targets", r.targets}, {"min", r.min}, {"max", r.max}};
    }
    j["events"][name] = {{"roles", roles}};
  }
  j["relations"] = json::object();
  for (const auto& [name, r] : s.relations) {
    j["relations"][name] = {{"roles", {r.arg1_role, r.arg2_role}},
                            {"arg1", r.arg1_types},
                            {"arg2", r.arg2_types},
                            {"directed", r.directed}};
  }
  j["modifiers"] = s.modifiers;
  return j.dump(2) + "\n";
}

}  // namespace attnie
