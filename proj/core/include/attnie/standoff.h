#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "attnie/event_graph.h"
#include "attnie/schema.h"

namespace attnie {

// Reads a .txt/.a1/.a2 triplet. Nodes from .a1 are marked given. A T line
// becomes a trigger when an E line uses it as trigger or the schema lists
// its type as an event type. Annotation files may use CRLF; offsets are
// byte offsets into `text`, which is kept as is.
// Throws ParseError (with line number), IntegrityError (span/surface
// mismatch, duplicate id) or ReferenceError (dangling id).
Document parse_standoff(std::string text, std::string_view a1, std::string_view a2,
                        std::string id = {}, const TaskSchema* schema = nullptr);

struct WriteOptions {
  // Assign fresh ids: predicted T after the given ones, E in nesting
  // order, then R and M. Otherwise the graph's own ids are kept.
  bool renumber = false;
};

// Lines for non-given nodes, events, relations and modifiers, in the
// order T, E (nested before parent), R, M. Throws IntegrityError on
// cyclic events.
std::string write_a2(const Document& doc, const WriteOptions& options = {});
// T lines of the given entities.
std::string write_a1(const Document& doc);

// Loads every <id>.txt under `dir` with its optional .a1 and .a2,
// sorted by id.
std::vector<Document> load_corpus(const std::filesystem::path& dir,
                                  const TaskSchema* schema = nullptr);
// Writes <id>.txt, <id>.a1 and <id>.a2.
void save_document(const std::filesystem::path& dir, const Document& doc,
                   const WriteOptions& options = {});
// Writes only <id>.a2, as submitted for evaluation.
void save_a2(const std::filesystem::path& dir, const Document& doc,
             const WriteOptions& options = {});

// Pairwise relation rows: doc<TAB>b:e<TAB>b:e<TAB>type.
struct TsvRelation {
  std::string doc;
  Span arg1;
  Span arg2;
  std::string type;
};
std::vector<TsvRelation> read_relation_tsv(std::istream& in);
void write_relation_tsv(std::ostream& out, const std::vector<TsvRelation>& rows);
std::vector<TsvRelation> relation_rows(const Document& doc);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace attnie
