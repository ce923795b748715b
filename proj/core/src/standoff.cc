#include "attnie/standoff.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "attnie/errors.h"

namespace attnie {
namespace {

std::vector<std::string_view> split(std::string_view s, char sep, bool skip_empty) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    std::string_view part = s.substr(start, pos == std::string_view::npos ? pos : pos - start);
    if (!skip_empty || !part.empty()) out.push_back(part);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::size_t parse_offset(std::string_view s, const std::string& where, std::size_t line) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw ParseError(where + ": bad offset '" + std::string(s) + "'", line);
  }
  return v;
}

std::string span_text(const std::string& text, const std::vector<Span>& spans) {
  std::string out;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (i) out += ' ';
    out += text.substr(spans[i].begin, spans[i].end - spans[i].begin);
  }
  return out;
}

struct RawModifier {
  std::string id;
  std::string kind;
  std::string event;
  std::size_t line;
  std::string file;
};

struct Parser {
  const std::string& text;
  Document& doc;
  std::vector<RawModifier> modifiers;

  void parse_file(std::string_view content, bool given, const std::string& file) {
    std::string normalized;
    normalized.reserve(content.size());
    for (std::size_t i = 0; i < content.size(); ++i) {
      if (content[i] == '\r' && i + 1 < content.size() && content[i + 1] == '\n') continue;
      normalized += content[i];
    }
    auto lines = split(normalized, '\n', false);
    for (std::size_t n = 0; n < lines.size(); ++n) {
      std::string_view line = lines[n];
      if (line.empty()) continue;
      parse_line(line, n + 1, given, file);
    }
  }

  void parse_line(std::string_view line, std::size_t lineno, bool given, const std::string& file) {
    const std::string where = file;
    auto fields = split(line, '\t', false);
    if (fields.size() < 2 || fields[0].empty()) {
      throw ParseError(where + ": expected id<TAB>annotation", lineno);
    }
    const std::string id(fields[0]);
    switch (id[0]) {
      case 'T': {
        if (fields.size() != 3) throw ParseError(where + ": T line needs 3 fields", lineno);
        Node node;
        node.id = id;
        node.given = given;
        std::size_t sp = fields[1].find(' ');
        if (sp == std::string_view::npos || sp == 0) {
          throw ParseError(where + ": T line without offsets", lineno);
        }
        node.type = std::string(fields[1].substr(0, sp));
        for (auto frag : split(fields[1].substr(sp + 1), ';', false)) {
          auto be = split(frag, ' ', false);
          if (be.size() != 2) throw ParseError(where + ": bad span '" + std::string(frag) + "'", lineno);
          Span s{parse_offset(be[0], where, lineno), parse_offset(be[1], where, lineno)};
          if (s.begin >= s.end) throw ParseError(where + ": empty span in " + id, lineno);
          node.spans.push_back(s);
        }
        node.surface = std::string(fields[2]);
        if (node.end() > text.size()) {
          throw IntegrityError(id + ": span " + std::to_string(node.end()) +
                               " exceeds text length " + std::to_string(text.size()));
        }
        if (span_text(text, node.spans) != node.surface) {
          throw IntegrityError(id + ": surface '" + node.surface + "' does not match text '" +
                               span_text(text, node.spans) + "'");
        }
        doc.graph.nodes.push_back(std::move(node));
        break;
      }
      case 'E': {
        auto parts = split(fields[1], ' ', true);
        if (parts.empty()) throw ParseError(where + ": empty E line", lineno);
        Event e;
        e.id = id;
        for (std::size_t i = 0; i < parts.size(); ++i) {
          std::size_t colon = parts[i].rfind(':');
          if (colon == std::string_view::npos || colon == 0 || colon + 1 == parts[i].size()) {
            throw ParseError(where + ": bad argument '" + std::string(parts[i]) + "'", lineno);
          }
          std::string key(parts[i].substr(0, colon));
          std::string val(parts[i].substr(colon + 1));
          if (i == 0) {
            e.type = key;
            e.trigger = val;
          } else {
            e.args.push_back({key, val});
          }
        }
        doc.graph.events.push_back(std::move(e));
        break;
      }
      case 'R': {
        auto parts = split(fields[1], ' ', true);
        if (parts.size() != 3) throw ParseError(where + ": R line needs a type and two arguments", lineno);
        Relation r;
        r.id = id;
        r.type = std::string(parts[0]);
        Argument* slots[2] = {&r.arg1, &r.arg2};
        for (int k = 0; k < 2; ++k) {
          std::size_t colon = parts[k + 1].find(':');
          if (colon == std::string_view::npos) {
            throw ParseError(where + ": bad argument '" + std::string(parts[k + 1]) + "'", lineno);
          }
          slots[k]->role = std::string(parts[k + 1].substr(0, colon));
          slots[k]->target = std::string(parts[k + 1].substr(colon + 1));
        }
        doc.graph.relations.push_back(std::move(r));
        break;
      }
      case 'M':
      case 'A': {
        auto parts = split(fields[1], ' ', true);
        if (parts.size() != 2) throw ParseError(where + ": modifier line needs a type and an event", lineno);
        std::string kind(parts[0]);
        if (kind != "Negation" && kind != "Speculation") {
          throw ParseError(where + ": unsupported modifier " + kind, lineno);
        }
        modifiers.push_back({id, kind, std::string(parts[1]), lineno, where});
        break;
      }
      default:
        throw ParseError(where + ": unknown annotation " + id, lineno);
    }
  }
};

std::string format_node(const Node& n) {
  std::string out = n.id + "\t" + n.type + " ";
  for (std::size_t i = 0; i < n.spans.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(n.spans[i].begin) + " " + std::to_string(n.spans[i].end);
  }
  return out + "\t" + n.surface + "\n";
}

// Copy of the graph with fresh ids, predicted nodes numbered after the
// given ones in text order.
EventGraph renumbered(const EventGraph& g) {
  std::map<std::string, std::string> ids;
  std::size_t next_t = 1;
  for (const auto& n : g.nodes) {
    if (n.given) next_t = std::max(next_t, id_number(n.id) + 1);
  }
  EventGraph out;
  std::vector<const Node*> predicted;
  for (const auto& n : g.nodes) {
    if (n.given) {
      out.nodes.push_back(n);
      ids[n.id] = n.id;
    } else {
      predicted.push_back(&n);
    }
  }
  std::stable_sort(predicted.begin(), predicted.end(), [](const Node* a, const Node* b) {
    if (a->begin() != b->begin()) return a->begin() < b->begin();
    if (a->end() != b->end()) return a->end() < b->end();
    return a->type < b->type;
  });
  for (const Node* n : predicted) {
    Node copy = *n;
    copy.id = "T" + std::to_string(next_t++);
    ids[n->id] = copy.id;
    out.nodes.push_back(std::move(copy));
  }
  // Events in nesting order, ties broken by trigger position and content,
  // so isomorphic graphs get identical ids.
  EventGraph sorted;
  sorted.nodes = g.nodes;
  sorted.events = g.events;
  auto span_of = [&g](const std::string& id) -> std::pair<std::size_t, std::size_t> {
    if (const Node* n = g.find_node(g.argument_node(id))) return {n->begin(), n->end()};
    return {0, 0};
  };
  std::vector<std::string> keys;
  for (const auto& e : g.events) keys.push_back(event_key(g, e));
  std::vector<std::size_t> perm(g.events.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    const auto sa = span_of(g.events[a].trigger), sb = span_of(g.events[b].trigger);
    if (sa != sb) return sa < sb;
    return keys[a] < keys[b];
  });
  for (std::size_t k = 0; k < perm.size(); ++k) sorted.events[k] = g.events[perm[k]];
  const std::vector<std::size_t> order = sorted.event_order();

  std::size_t next_e = 1;
  for (std::size_t i : order) ids[sorted.events[i].id] = "E" + std::to_string(next_e++);
  std::size_t next_m = 1;
  for (std::size_t i : order) {
    Event e = sorted.events[i];
    // Theme roles first, then by role name and target position.
    std::stable_sort(e.args.begin(), e.args.end(), [&](const Argument& a, const Argument& b) {
      const bool ta = base_role(a.role) == "Theme", tb = base_role(b.role) == "Theme";
      if (ta != tb) return ta;
      if (a.role != b.role) return a.role < b.role;
      return span_of(a.target) < span_of(b.target);
    });
    e.id = ids.at(e.id);
    e.trigger = ids.at(e.trigger);
    for (auto& a : e.args) a.target = ids.at(a.target);
    if (e.negated()) e.negation_id = "M" + std::to_string(next_m++);
    if (e.speculated()) e.speculation_id = "M" + std::to_string(next_m++);
    out.events.push_back(std::move(e));
  }
  std::vector<const Relation*> rels;
  for (const auto& r : g.relations) rels.push_back(&r);
  std::stable_sort(rels.begin(), rels.end(), [&](const Relation* a, const Relation* b) {
    const auto ka = std::make_tuple(span_of(a->arg1.target), span_of(a->arg2.target), a->type);
    const auto kb = std::make_tuple(span_of(b->arg1.target), span_of(b->arg2.target), b->type);
    return ka < kb;
  });
  std::size_t next_r = 1;
  for (const Relation* r : rels) {
    Relation copy = *r;
    copy.id = "R" + std::to_string(next_r++);
    copy.arg1.target = ids.at(r->arg1.target);
    copy.arg2.target = ids.at(r->arg2.target);
    out.relations.push_back(std::move(copy));
  }
  return out;
}

}  // namespace

Document parse_standoff(std::string text, std::string_view a1, std::string_view a2,
                        std::string id, const TaskSchema* schema) {
  Document doc;
  doc.id = std::move(id);
  doc.text = std::move(text);
  Parser p{doc.text, doc, {}};
  p.parse_file(a1, true, "a1");
  p.parse_file(a2, false, "a2");

  for (auto& n : doc.graph.nodes) {
    bool used = std::any_of(doc.graph.events.begin(), doc.graph.events.end(),
                            [&](const Event& e) { return e.trigger == n.id; });
    if (used || (schema && schema->is_event_type(n.type))) n.kind = NodeKind::kTrigger;
  }
  for (const auto& m : p.modifiers) {
    Event* e = doc.graph.find_event(m.event);
    if (!e) throw ReferenceError(m.id + " references missing event " + m.event);
    std::string& slot = m.kind == "Negation" ? e->negation_id : e->speculation_id;
    if (!slot.empty()) throw IntegrityError(m.id + " repeats a modifier of " + m.event);
    slot = m.id;
  }
  doc.graph.validate(doc.text);
  return doc;
}

std::string write_a1(const Document& doc) {
  std::vector<const Node*> given;
  for (const auto& n : doc.graph.nodes) {
    if (n.given) given.push_back(&n);
  }
  std::stable_sort(given.begin(), given.end(),
                   [](const Node* a, const Node* b) { return id_less(a->id, b->id); });
  std::string out;
  for (const Node* n : given) out += format_node(*n);
  return out;
}

std::string write_a2(const Document& doc, const WriteOptions& options) {
  const EventGraph g = options.renumber ? renumbered(doc.graph) : doc.graph;
  g.event_order();

  std::string out;
  std::vector<const Node*> nodes;
  for (const auto& n : g.nodes) {
    if (!n.given) nodes.push_back(&n);
  }
  std::stable_sort(nodes.begin(), nodes.end(),
                   [](const Node* a, const Node* b) { return id_less(a->id, b->id); });
  for (const Node* n : nodes) out += format_node(*n);

  // Nested events first; among ready events the smaller id goes first.
  EventGraph by_id;
  by_id.nodes = g.nodes;
  by_id.events = g.events;
  std::stable_sort(by_id.events.begin(), by_id.events.end(),
                   [](const Event& a, const Event& b) { return id_less(a.id, b.id); });
  std::vector<std::pair<std::string, std::string>> mods;
  for (std::size_t i : by_id.event_order()) {
    const Event& e = by_id.events[i];
    out += e.id + "\t" + e.type + ":" + e.trigger;
    for (const auto& a : e.args) out += " " + a.role + ":" + a.target;
    out += "\n";
    if (e.negated()) mods.emplace_back(e.negation_id, "Negation " + e.id);
    if (e.speculated()) mods.emplace_back(e.speculation_id, "Speculation " + e.id);
  }

  std::vector<const Relation*> rels;
  for (const auto& r : g.relations) rels.push_back(&r);
  std::stable_sort(rels.begin(), rels.end(),
                   [](const Relation* a, const Relation* b) { return id_less(a->id, b->id); });
  for (const Relation* r : rels) {
    out += r->id + "\t" + r->type + " " + r->arg1.role + ":" + r->arg1.target + " " +
           r->arg2.role + ":" + r->arg2.target + "\n";
  }

  std::stable_sort(mods.begin(), mods.end(),
                   [](const auto& a, const auto& b) { return id_less(a.first, b.first); });
  for (const auto& [mid, body] : mods) out += mid + "\t" + body + "\n";
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IngestionError("failed writing " + path.string());
}

std::vector<Document> load_corpus(const std::filesystem::path& dir, const TaskSchema* schema) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IngestionError("not a directory: " + dir.string());
  std::vector<fs::path> texts;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      texts.push_back(entry.path());
    }
  }
  std::sort(texts.begin(), texts.end());
  std::vector<Document> docs;
  for (const auto& txt : texts) {
    auto optional = [](fs::path p) { return fs::exists(p) ? read_file(p) : std::string(); };
    fs::path a1 = txt, a2 = txt;
    a1.replace_extension(".a1");
    a2.replace_extension(".a2");
    try {
      docs.push_back(parse_standoff(read_file(txt), optional(a1), optional(a2),
                                    txt.stem().string(), schema));
    } catch (const ParseError& e) {
      throw ParseError(txt.stem().string() + ": " + e.what());
    } catch (const IntegrityError& e) {
      throw IntegrityError(txt.stem().string() + ": " + e.what());
    } catch (const ReferenceError& e) {
      throw ReferenceError(txt.stem().string() + ": " + e.what());
    }
  }
  return docs;
}

void save_document(const std::filesystem::path& dir, const Document& doc,
                   const WriteOptions& options) {
  write_file(dir / (doc.id + ".txt"), doc.text);
  write_file(dir / (doc.id + ".a1"), write_a1(doc));
  write_file(dir / (doc.id + ".a2"), write_a2(doc, options));
}

void save_a2(const std::filesystem::path& dir, const Document& doc,
             const WriteOptions& options) {
  write_file(dir / (doc.id + ".a2"), write_a2(doc, options));
}

std::vector<TsvRelation> read_relation_tsv(std::istream& in) {
  std::vector<TsvRelation> rows;
  std::string line;
  std::size_t lineno = 0;
  auto span = [&](std::string_view s) {
    auto parts = split(s, ':', false);
    if (parts.size() != 2) throw ParseError("tsv: bad span '" + std::string(s) + "'", lineno);
    Span out{parse_offset(parts[0], "tsv", lineno), parse_offset(parts[1], "tsv", lineno)};
    if (out.begin >= out.end) throw ParseError("tsv: empty span", lineno);
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split(line, '\t', false);
    if (f.size() != 4) throw ParseError("tsv: expected 4 fields", lineno);
    rows.push_back({std::string(f[0]), span(f[1]), span(f[2]), std::string(f[3])});
  }
  return rows;
}

void write_relation_tsv(std::ostream& out, const std::vector<TsvRelation>& rows) {
  for (const auto& r : rows) {
    out << r.doc << '\t' << r.arg1.begin << ':' << r.arg1.end << '\t' << r.arg2.begin << ':'
        << r.arg2.end << '\t' << r.type << '\n';
  }
}

std::vector<TsvRelation> relation_rows(const Document& doc) {
  std::vector<TsvRelation> rows;
  for (const auto& r : doc.graph.relations) {
    const Node* a = doc.graph.find_node(doc.graph.argument_node(r.arg1.target));
    const Node* b = doc.graph.find_node(doc.graph.argument_node(r.arg2.target));
    if (!a || !b) continue;
    rows.push_back({doc.id, {a->begin(), a->end()}, {b->begin(), b->end()}, r.type});
  }
  return rows;
}

}  // namespace attnie
