#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "attnie/event_graph.h"
#include "attnie/layers.h"
#include "attnie/schema.h"

namespace attnie {

// Pooled counts; ratios are 0 when their denominator is 0.
struct PRF {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double precision() const;
  double recall() const;
  double f1() const;
  PRF& operator+=(const PRF& other);
  friend bool operator==(const PRF&, const PRF&) = default;
};

using TupleSet = std::set<std::string>;

PRF micro_prf(const TupleSet& gold, const TupleSet& predicted);

// Label-level counts for multilabel classification at `threshold`.
PRF multilabel_prf(const std::vector<std::vector<double>>& targets,
                   const std::vector<std::vector<double>>& confidences,
                   double threshold = 0.5);

// Scored tuples of a document: events (with full nested structure),
// modifiers and relations, prefixed with the document id.
TupleSet document_tuples(const Document& doc, const TaskSchema* schema = nullptr);

struct CorpusScores {
  PRF all;
  PRF events;
  PRF relations;
  PRF modifiers;
};

// Pairs documents by id; a predicted corpus lacking a document scores it
// as empty.
CorpusScores evaluate_corpus(const std::vector<Document>& gold,
                             const std::vector<Document>& predicted,
                             const TaskSchema* schema = nullptr);

// Token count strictly between the two farthest involved nodes, measured
// on the library tokenizer. Overlapping or adjacent nodes give 0.
std::size_t farthest_distance(const Document& doc, const std::vector<const Node*>& nodes);

// Bin k holds distances in [lower[k], lower[k+1]); the last bin is open.
struct DistanceBins {
  std::vector<std::size_t> lower;
  std::vector<PRF> scores;

  std::size_t bin_of(std::size_t distance) const;
};

std::vector<std::size_t> default_distance_bins();  // 0, 5, ..., 30

// Relations and events scored per bin of their farthest-node distance.
DistanceBins distance_binned_eval(const std::vector<Document>& gold,
                                  const std::vector<Document>& predicted,
                                  std::vector<std::size_t> lower = default_distance_bins(),
                                  const TaskSchema* schema = nullptr);

// Attention summed over heads, [I][I].
using Matrix = std::vector<std::vector<double>>;
Matrix summed_attention(const AttentionTrace& trace);

// Token x token CSV with a header row and column, and a standalone SVG
// heatmap. Throws ContractError when |tokens| differs from I.
std::string attention_csv(const Matrix& m, const std::vector<std::string>& tokens);
std::string attention_svg(const Matrix& m, const std::vector<std::string>& tokens);
void export_attention(const AttentionTrace& trace, const std::vector<std::string>& tokens,
                      const std::filesystem::path& stem);

struct AttentionTable {
  std::vector<std::string> tokens;
  Matrix values;
};
AttentionTable parse_attention_csv(std::string_view csv);

}  // namespace attnie
