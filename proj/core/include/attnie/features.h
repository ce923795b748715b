#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "attnie/tensor.h"

namespace attnie {

// Token -> dense index. Index 0 is padding, index 1 the unknown token.
class Vocab {
 public:
  static constexpr std::int64_t kPadding = 0;
  static constexpr std::int64_t kUnknown = 1;

  Vocab();
  // Rebuilds a vocabulary from its token list (as written to a sidecar).
  // The list must start with the padding and unknown entries.
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::int64_t add(const std::string& token);
  std::int64_t index(std::string_view token) const;  // kUnknown when absent
  bool contains(std::string_view token) const;
  const std::string& token(std::int64_t index) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int64_t> index_;
};

// Indexes tokens seen at least `min_count` times, ordered by descending
// count then lexicographically. Throws IngestionError on an empty corpus.
Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus,
                  std::size_t min_count);

// Role codes marking the tokens of the structure being classified.
enum class Role : std::uint8_t {
  kNone = 0,
  kEntity1,
  kEntity2,
  kTrigger,
  kArgument,
};
inline constexpr std::size_t kRoleCount = 5;

// Row of the role table for `role`; row 0 is reserved for padding.
inline std::int64_t role_index(Role role) {
  return static_cast<std::int64_t>(role) + 1;
}

// A token range [begin,end) of interest within a sentence.
struct Anchor {
  std::size_t begin = 0;
  std::size_t end = 0;
  Role role = Role::kNone;
};

struct FeatureConfig {
  std::size_t word_dim = 200;
  std::size_t role_dim = 8;
  std::size_t distance_dim = 8;
  int max_distance = 50;
  std::size_t max_window = 100;
  // Anchors that receive their own distance channel (the first N).
  std::size_t distance_anchors = 2;
  bool use_roles = true;
  bool use_distances = true;
  // Pad short sentences with padding tokens up to max_window.
  bool pad_to_window = false;

  void validate() const;
  // Rows in each distance table: padding + 2*max_distance + 1 buckets.
  std::size_t distance_rows() const {
    return 2 * static_cast<std::size_t>(max_distance) + 2;
  }
  // Sum of the embedding widths, before padding to a head multiple.
  std::size_t feature_width() const;
};

// Clips a signed token distance to +-max_distance and maps it one-to-one
// onto [1, 2*max_distance+1]. Bucket 0 stays reserved for padding.
std::int64_t distance_bucket(std::ptrdiff_t distance, int max_distance);

// Signed distance from token `i` to an anchor: negative before it, zero
// inside it, positive after it.
std::ptrdiff_t anchor_distance(std::size_t i, const Anchor& anchor);

// One classification instance over a sentence window.
struct EncodedExample {
  std::vector<std::int64_t> tokens;
  std::vector<std::int64_t> roles;
  std::vector<std::vector<std::int64_t>> distances;  // [channel][token]
  std::vector<double> labels;                        // multilabel targets
  std::size_t sentence = 0;
  std::size_t window_start = 0;             // sentence offset of token 0
  std::vector<std::size_t> anchor_offsets;  // anchor begins, window-relative

  std::size_t length() const { return tokens.size(); }
};

// Model outputs for a batch: one row of label confidences per example.
using Confidences = std::vector<std::vector<double>>;

// Builds the feature indices for a sentence window around `anchors`.
// Sentences longer than max_window are cut to a window centred on the
// midpoint of the anchor span; anchors that cannot fit raise EncodingError,
// as do anchors outside the sentence.
EncodedExample encode_example(std::span<const std::string> words,
                              std::span<const Anchor> anchors,
                              std::vector<double> labels, const Vocab& vocab,
                              const FeatureConfig& config);

// Plain word2vec text layout: header "count dim", then "token v1 .. vdim".
struct WordVectors {
  std::size_t dim = 0;
  std::vector<std::string> tokens;
  std::vector<double> values;  // tokens.size() x dim
};

WordVectors parse_word2vec(std::istream& in);
WordVectors read_word2vec(const std::filesystem::path& path);

// Deterministic small vector for a token missing from the pretrained file.
// Depends only on (token, dim, seed).
std::vector<double> fallback_vector(std::string_view token, std::size_t dim,
                                    std::uint64_t seed);

struct EmbeddingTable {
  std::string name;
  Tensor weights;  // [rows, dim]; row 0 is padding and stays zero
  bool trainable = true;

  std::size_t rows() const { return weights.dim(0); }
  std::size_t dim() const { return weights.dim(1); }
};

// Frozen word table over `vocab`, filled from `vectors` where present and
// from fallback_vector() otherwise. `vectors` may be null.
EmbeddingTable make_word_table(const Vocab& vocab, std::size_t dim,
                               std::uint64_t seed,
                               const WordVectors* vectors = nullptr);

// load_word_vectors = read_word2vec + make_word_table.
EmbeddingTable load_word_vectors(const std::filesystem::path& path,
                                 const Vocab& vocab, std::uint64_t seed);

struct FeatureTables {
  EmbeddingTable words;
  EmbeddingTable roles;
  std::vector<EmbeddingTable> distances;  // one per distance channel

  std::vector<const EmbeddingTable*> all() const;
};

FeatureTables make_feature_tables(const Vocab& vocab,
                                  const FeatureConfig& config,
                                  std::uint64_t seed,
                                  const WordVectors* vectors = nullptr);

// Smallest multiple of `heads` that is >= width.
std::size_t padded_width(std::size_t width, std::size_t heads);

// Concatenates the word, role and distance lookups into [I, width]; extra
// columns up to `width` are zero. Padding tokens map to all-zero rows.
Tensor embed(const EncodedExample& example, const FeatureTables& tables,
             const FeatureConfig& config, std::size_t width);

// Glorot/Xavier uniform limit sqrt(6/(fan_in+fan_out)).
double glorot_limit(std::size_t fan_in, std::size_t fan_out);

}  // namespace attnie
