#include "attnie/metrics.h"

#include <algorithm>
#include <cstdio>
#include <map>

#include "attnie/errors.h"
#include "attnie/standoff.h"
#include "attnie/text.h"

namespace attnie {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

bool undirected(const TaskSchema* schema, const std::string& type) {
  if (!schema) return false;
  auto it = schema->relations.find(type);
  return it != schema->relations.end() && !it->second.directed;
}

struct KindSets {
  TupleSet events, relations, modifiers;
};

KindSets kind_sets(const Document& doc, const TaskSchema* schema) {
  KindSets k;
  const std::string prefix = doc.id + "\t";
  for (const auto& e : doc.graph.events) {
    const std::string key = event_key(doc.graph, e);
    k.events.insert(prefix + key);
    if (e.negated()) k.modifiers.insert(prefix + "Negation|" + key);
    if (e.speculated()) k.modifiers.insert(prefix + "Speculation|" + key);
  }
  for (const auto& r : doc.graph.relations) {
    k.relations.insert(prefix + relation_key(doc.graph, r, undirected(schema, r.type)));
  }
  return k;
}

void collect_event_nodes(const EventGraph& g, const Event& e, std::vector<const Node*>& out,
                         std::size_t depth) {
  if (depth > g.events.size()) return;
  if (const Node* t = g.find_node(e.trigger)) out.push_back(t);
  for (const auto& a : e.args) {
    if (const Node* n = g.find_node(a.target)) {
      out.push_back(n);
    } else if (const Event* nested = g.find_event(a.target)) {
      collect_event_nodes(g, *nested, out, depth + 1);
    }
  }
}

// Tuple key -> farthest-node distance for every scored item.
std::map<std::string, std::size_t> distances_of(const Document& doc, const TaskSchema* schema) {
  std::map<std::string, std::size_t> out;
  const std::string prefix = doc.id + "\t";
  for (const auto& e : doc.graph.events) {
    std::vector<const Node*> nodes;
    collect_event_nodes(doc.graph, e, nodes, 0);
    out[prefix + event_key(doc.graph, e)] = farthest_distance(doc, nodes);
  }
  for (const auto& r : doc.graph.relations) {
    std::vector<const Node*> nodes;
    for (const auto* a : {&r.arg1, &r.arg2}) {
      if (const Node* n = doc.graph.find_node(doc.graph.argument_node(a->target))) {
        nodes.push_back(n);
      }
    }
    out[prefix + relation_key(doc.graph, r, undirected(schema, r.type))] =
        farthest_distance(doc, nodes);
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_tokens(const Matrix& m, const std::vector<std::string>& tokens) {
  if (m.size() != tokens.size()) {
    throw ContractError("attention map has " + std::to_string(m.size()) + " rows but " +
                        std::to_string(tokens.size()) + " tokens were given");
  }
}

}  // namespace

double PRF::precision() const { return ratio(tp, tp + fp); }
double PRF::recall() const { return ratio(tp, tp + fn); }

double PRF::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

PRF& PRF::operator+=(const PRF& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

PRF micro_prf(const TupleSet& gold, const TupleSet& predicted) {
  PRF out;
  for (const auto& t : predicted) {
    if (gold.count(t)) {
      ++out.tp;
    } else {
      ++out.fp;
    }
  }
  out.fn = gold.size() - out.tp;
  return out;
}

PRF multilabel_prf(const std::vector<std::vector<double>>& targets,
                   const std::vector<std::vector<double>>& confidences, double threshold) {
  if (targets.size() != confidences.size()) {
    throw DimensionError("multilabel_prf: row count mismatch");
  }
  PRF out;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].size() != confidences[i].size()) {
      throw DimensionError("multilabel_prf: label count mismatch");
    }
    for (std::size_t k = 0; k < targets[i].size(); ++k) {
      const bool gold = targets[i][k] >= 0.5;
      const bool pred = confidences[i][k] >= threshold;
      if (gold && pred) ++out.tp;
      if (!gold && pred) ++out.fp;
      if (gold && !pred) ++out.fn;
    }
  }
  return out;
}

TupleSet document_tuples(const Document& doc, const TaskSchema* schema) {
  KindSets k = kind_sets(doc, schema);
  TupleSet out = std::move(k.events);
  out.insert(k.relations.begin(), k.relations.end());
  out.insert(k.modifiers.begin(), k.modifiers.end());
  return out;
}

CorpusScores evaluate_corpus(const std::vector<Document>& gold,
                             const std::vector<Document>& predicted, const TaskSchema* schema) {
  KindSets g, p;
  auto merge = [&](KindSets& into, const Document& d) {
    KindSets k = kind_sets(d, schema);
    into.events.insert(k.events.begin(), k.events.end());
    into.relations.insert(k.relations.begin(), k.relations.end());
    into.modifiers.insert(k.modifiers.begin(), k.modifiers.end());
  };
  for (const auto& d : gold) merge(g, d);
  for (const auto& d : predicted) merge(p, d);
  CorpusScores s;
  s.events = micro_prf(g.events, p.events);
  s.relations = micro_prf(g.relations, p.relations);
  s.modifiers = micro_prf(g.modifiers, p.modifiers);
  s.all = s.events;
  s.all += s.relations;
  s.all += s.modifiers;
  return s;
}

std::size_t farthest_distance(const Document& doc, const std::vector<const Node*>& nodes) {
  if (nodes.size() < 2) return 0;
  const std::vector<Token> tokens = tokenize(doc.text);
  std::size_t max_first = 0, min_last = static_cast<std::size_t>(-1);
  for (const Node* n : nodes) {
    std::size_t first = tokens.size(), last = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i].end > n->begin() && tokens[i].begin < n->end()) {
        first = std::min(first, i);
        last = std::max(last, i);
      }
    }
    if (first == tokens.size()) continue;
    max_first = std::max(max_first, first);
    min_last = std::min(min_last, last);
  }
  if (min_last == static_cast<std::size_t>(-1) || max_first <= min_last + 1) return 0;
  return max_first - min_last - 1;
}

std::size_t DistanceBins::bin_of(std::size_t distance) const {
  std::size_t k = 0;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (distance >= lower[i]) k = i;
  }
  return k;
}

std::vector<std::size_t> default_distance_bins() { return {0, 5, 10, 15, 20, 25, 30}; }

DistanceBins distance_binned_eval(const std::vector<Document>& gold,
                                  const std::vector<Document>& predicted,
                                  std::vector<std::size_t> lower, const TaskSchema* schema) {
  std::sort(lower.begin(), lower.end());
  lower.erase(std::unique(lower.begin(), lower.end()), lower.end());
  if (lower.empty() || lower.front() != 0) lower.insert(lower.begin(), 0);
  DistanceBins out;
  out.lower = std::move(lower);
  out.scores.assign(out.lower.size(), PRF{});

  std::map<std::string, std::size_t> g, p;
  for (const auto& d : gold) g.merge(distances_of(d, schema));
  for (const auto& d : predicted) p.merge(distances_of(d, schema));
  for (const auto& [key, dist] : p) {
    auto it = g.find(key);
    if (it != g.end()) {
      ++out.scores[out.bin_of(it->second)].tp;
    } else {
      ++out.scores[out.bin_of(dist)].fp;
    }
  }
  for (const auto& [key, dist] : g) {
    if (!p.count(key)) ++out.scores[out.bin_of(dist)].fn;
  }
  return out;
}

Matrix summed_attention(const AttentionTrace& trace) {
  const Tensor& w = trace.weights;
  if (w.rank() != 3 || w.dim(1) != w.dim(2)) {
    throw DimensionError("attention weights must be [H,I,I], got " + shape_string(w.shape()));
  }
  const std::size_t heads = w.dim(0), len = w.dim(1);
  Matrix m(len, std::vector<double>(len, 0.0));
  auto d = w.data();
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < len; ++j) m[i][j] += d[(h * len + i) * len + j];
    }
  }
  return m;
}

std::string attention_csv(const Matrix& m, const std::vector<std::string>& tokens) {
  check_tokens(m, tokens);
  std::string out = "token";
  for (const auto& t : tokens) out += "," + csv_field(t);
  out += "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].size() != tokens.size()) throw ContractError("attention map is not square");
    out += csv_field(tokens[i]);
    for (double v : m[i]) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

std::string attention_svg(const Matrix& m, const std::vector<std::string>& tokens) {
  check_tokens(m, tokens);
  const std::size_t n = m.size();
  const int cell = 18, margin = 90;
  double peak = 0.0;
  for (const auto& row : m) {
    for (double v : row) peak = std::max(peak, v);
  }
  const int size = margin + static_cast<int>(n) * cell + 10;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(size) + "\" height=\"" + std::to_string(size) +
                    "\" font-family=\"monospace\" font-size=\"10\">\n";
  for (std::size_t i = 0; i < n; ++i) {
    const int pos = margin + static_cast<int>(i) * cell;
    out += "<text x=\"" + std::to_string(margin - 4) + "\" y=\"" +
           std::to_string(pos + cell - 5) + "\" text-anchor=\"end\">" + xml_escape(tokens[i]) +
           "</text>\n";
    out += "<text transform=\"translate(" + std::to_string(pos + cell - 5) + "," +
           std::to_string(margin - 4) + ") rotate(-90)\">" + xml_escape(tokens[i]) +
           "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double t = peak > 0.0 ? m[i][j] / peak : 0.0;
      const int shade = 255 - static_cast<int>(t * 215.0);
      out += "<rect x=\"" + std::to_string(margin + static_cast<int>(j) * cell) + "\" y=\"" +
             std::to_string(margin + static_cast<int>(i) * cell) + "\" width=\"" +
             std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"rgb(" +
             std::to_string(shade) + "," + std::to_string(shade) + ",255)\"><title>" +
             format_double(m[i][j]) + "</title></rect>\n";
    }
  }
  return out + "</svg>\n";
}

void export_attention(const AttentionTrace& trace, const std::vector<std::string>& tokens,
                      const std::filesystem::path& stem) {
  const Matrix m = summed_attention(trace);
  std::filesystem::path csv = stem, svg = stem;
  csv += ".csv";
  svg += ".svg";
  write_file(csv, attention_csv(m, tokens));
  write_file(svg, attention_svg(m, tokens));
}

AttentionTable parse_attention_csv(std::string_view csv) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < csv.size(); ++i) {
    const char c = csv[i];
    if (quoted) {
      if (c == '"' && i + 1 < csv.size() && csv[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("attention csv is empty");
  AttentionTable t;
  t.tokens.assign(rows[0].begin() + 1, rows[0].end());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != t.tokens.size() + 1) {
      throw ParseError("attention csv row has the wrong width", r + 1);
    }
    std::vector<double> values;
    for (std::size_t c = 1; c < rows[r].size(); ++c) {
      try {
        values.push_back(std::stod(rows[r][c]));
      } catch (const std::exception&) {
        throw ParseError("attention csv holds a non-number", r + 1);
      }
    }
    t.values.push_back(std::move(values));
  }
  return t;
}

}  // namespace attnie
