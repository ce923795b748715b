#include "attnie/features.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <random>
#include <sstream>

#include "attnie/errors.h"
#include "attnie/ops.h"

namespace attnie {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Magnitude of fallback word vectors.
constexpr double kFallbackRange = 0.25;

Tensor glorot_table(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
  const double limit = glorot_limit(rows, dim);
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> values(rows * dim);
  for (double& v : values) v = dist(rng);
  std::fill_n(values.begin(), dim, 0.0);  // padding row
  return Tensor::from({rows, dim}, std::move(values), true);
}

}  // namespace

Vocab::Vocab() {
  add("<pad>");
  add("<unk>");
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw FormatError("vocabulary must start with <pad> and <unk>");
  }
  Vocab v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) {
      throw FormatError("duplicate vocabulary entry '" + tokens[i] + "'");
    }
    v.add(tokens[i]);
  }
  return v;
}

std::int64_t Vocab::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const auto idx = static_cast<std::int64_t>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, idx);
  return idx;
}

std::int64_t Vocab::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknown : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

const std::string& Vocab::token(std::int64_t index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size()) {
    throw EncodingError("vocabulary index " + std::to_string(index) +
                        " out of range");
  }
  return tokens_[static_cast<std::size_t>(index)];
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus,
                  std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  bool any = false;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) {
      ++counts[tok];
      any = true;
    }
  }
  if (!any) throw IngestionError("cannot build a vocabulary from an empty corpus");
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;  // map order breaks ties
                   });
  Vocab vocab;
  for (const auto& [tok, n] : ranked) {
    if (n >= std::max<std::size_t>(min_count, 1)) vocab.add(tok);
  }
  return vocab;
}

void FeatureConfig::validate() const {
  if (word_dim == 0) throw ConfigError("word_dim must be positive");
  if (use_roles && role_dim == 0) throw ConfigError("role_dim must be positive");
  if (use_distances && distance_dim == 0) {
    throw ConfigError("distance_dim must be positive");
  }
  if (max_distance < 1) throw ConfigError("max_distance must be >= 1");
  if (max_window == 0) throw ConfigError("max_window must be positive");
}

std::size_t FeatureConfig::feature_width() const {
  std::size_t n = word_dim;
  if (use_roles) n += role_dim;
  if (use_distances) n += distance_dim * distance_anchors;
  return n;
}

std::int64_t distance_bucket(std::ptrdiff_t distance, int max_distance) {
  const std::ptrdiff_t clipped =
      std::clamp<std::ptrdiff_t>(distance, -max_distance, max_distance);
  return static_cast<std::int64_t>(clipped + max_distance + 1);
}

std::ptrdiff_t anchor_distance(std::size_t i, const Anchor& anchor) {
  const auto pos = static_cast<std::ptrdiff_t>(i);
  const auto begin = static_cast<std::ptrdiff_t>(anchor.begin);
  const auto last = static_cast<std::ptrdiff_t>(anchor.end) - 1;
  if (pos < begin) return pos - begin;
  if (pos > last) return pos - last;
  return 0;
}

EncodedExample encode_example(std::span<const std::string> words,
                              std::span<const Anchor> anchors,
                              std::vector<double> labels, const Vocab& vocab,
                              const FeatureConfig& config) {
  const std::size_t n = words.size();
  if (n == 0) throw EncodingError("cannot encode an empty sentence");
  std::size_t lo = n, hi = 0;
  for (const Anchor& a : anchors) {
    if (a.begin >= a.end || a.end > n) {
      throw EncodingError("anchor [" + std::to_string(a.begin) + "," +
                          std::to_string(a.end) + ") outside sentence of " +
                          std::to_string(n) + " tokens");
    }
    lo = std::min(lo, a.begin);
    hi = std::max(hi, a.end);
  }
  if (anchors.empty()) {
    lo = 0;
    hi = std::min(n, config.max_window);
  }

  std::size_t start = 0, len = n;
  if (n > config.max_window) {
    if (hi - lo > config.max_window) {
      throw EncodingError("anchors span " + std::to_string(hi - lo) +
                          " tokens, more than the window of " +
                          std::to_string(config.max_window));
    }
    len = config.max_window;
    const std::size_t mid = (lo + hi) / 2;
    const std::size_t half = len / 2;
    std::size_t s = mid > half ? mid - half : 0;
    s = std::min(s, n - len);
    s = std::min(s, lo);                    // keep the first anchor
    s = std::max(s, hi > len ? hi - len : 0);  // and the last one
    start = s;
  }
  std::size_t left_pad = 0, right_pad = 0;
  if (config.pad_to_window && len < config.max_window) {
    const std::size_t pad = config.max_window - len;
    left_pad = pad / 2;
    right_pad = pad - left_pad;
  }

  const std::size_t channels = config.use_distances ? config.distance_anchors : 0;
  EncodedExample ex;
  ex.window_start = start;
  const std::size_t total = left_pad + len + right_pad;
  ex.tokens.assign(total, Vocab::kPadding);
  ex.roles.assign(total, 0);
  ex.distances.assign(channels, std::vector<std::int64_t>(total, 0));
  for (std::size_t k = 0; k < len; ++k) {
    const std::size_t i = start + k;  // sentence position
    const std::size_t out = left_pad + k;
    ex.tokens[out] = vocab.index(words[i]);
    Role role = Role::kNone;
    for (const Anchor& a : anchors) {
      if (i >= a.begin && i < a.end) {
        role = a.role;
        break;
      }
    }
    ex.roles[out] = role_index(role);
    for (std::size_t c = 0; c < channels && c < anchors.size(); ++c) {
      ex.distances[c][out] =
          distance_bucket(anchor_distance(i, anchors[c]), config.max_distance);
    }
  }
  for (const Anchor& a : anchors) {
    ex.anchor_offsets.push_back(left_pad + a.begin - start);
  }
  ex.labels = std::move(labels);
  return ex;
}

WordVectors parse_word2vec(std::istream& in) {
  WordVectors wv;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream fields(line);
    if (!header) {
      long long count = -1, dim = -1;
      std::string extra;
      if (!(fields >> count >> dim) || (fields >> extra) || count < 0 ||
          dim <= 0) {
        throw ParseError("word2vec header must be 'count dim'", line_no);
      }
      expected = static_cast<std::size_t>(count);
      wv.dim = static_cast<std::size_t>(dim);
      header = true;
      continue;
    }
    std::string token;
    fields >> token;
    std::vector<double> row;
    std::string field;
    while (fields >> field) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != field.size() || !std::isfinite(v)) {
        throw ParseError("malformed value '" + field + "' in word2vec file",
                         line_no);
      }
      row.push_back(v);
    }
    if (row.size() != wv.dim) {
      throw FormatError("word2vec line " + std::to_string(line_no) + " has " +
                        std::to_string(row.size()) + " values, header says " +
                        std::to_string(wv.dim));
    }
    wv.tokens.push_back(token);
    wv.values.insert(wv.values.end(), row.begin(), row.end());
  }
  if (!header) throw ParseError("word2vec file is empty", line_no);
  if (wv.tokens.size() != expected) {
    throw FormatError("word2vec header announces " + std::to_string(expected) +
                      " vectors, found " + std::to_string(wv.tokens.size()));
  }
  return wv;
}

WordVectors read_word2vec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open word vectors " + path.string());
  return parse_word2vec(in);
}

std::vector<double> fallback_vector(std::string_view token, std::size_t dim,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(fnv1a(token) ^ splitmix64(seed)));
  std::uniform_real_distribution<double> dist(-kFallbackRange, kFallbackRange);
  std::vector<double> v(dim);
  for (double& x : v) x = dist(rng);
  return v;
}

EmbeddingTable make_word_table(const Vocab& vocab, std::size_t dim,
                               std::uint64_t seed, const WordVectors* vectors) {
  if (vectors && vectors->dim != dim) {
    throw ConfigError("word vectors have dimension " +
                      std::to_string(vectors->dim) + ", model expects " +
                      std::to_string(dim));
  }
  std::unordered_map<std::string, std::size_t> pretrained;
  if (vectors) {
    for (std::size_t i = 0; i < vectors->tokens.size(); ++i) {
      pretrained.emplace(vectors->tokens[i], i);
    }
  }
  std::vector<double> values(vocab.size() * dim, 0.0);
  for (std::size_t r = 1; r < vocab.size(); ++r) {
    const std::string& tok = vocab.tokens()[r];
    auto it = pretrained.find(tok);
    if (it != pretrained.end()) {
      std::copy_n(vectors->values.begin() +
                      static_cast<std::ptrdiff_t>(it->second * dim),
                  dim, values.begin() + static_cast<std::ptrdiff_t>(r * dim));
    } else {
      auto fb = fallback_vector(tok, dim, seed);
      std::copy(fb.begin(), fb.end(),
                values.begin() + static_cast<std::ptrdiff_t>(r * dim));
    }
  }
  return {"words", Tensor::from({vocab.size(), dim}, std::move(values), false),
          false};
}

EmbeddingTable load_word_vectors(const std::filesystem::path& path,
                                 const Vocab& vocab, std::uint64_t seed) {
  const WordVectors wv = read_word2vec(path);
  return make_word_table(vocab, wv.dim, seed, &wv);
}

std::vector<const EmbeddingTable*> FeatureTables::all() const {
  std::vector<const EmbeddingTable*> out{&words};
  if (roles.weights.defined()) out.push_back(&roles);
  for (const auto& d : distances) out.push_back(&d);
  return out;
}

FeatureTables make_feature_tables(const Vocab& vocab,
                                  const FeatureConfig& config,
                                  std::uint64_t seed,
                                  const WordVectors* vectors) {
  config.validate();
  FeatureTables t;
  t.words = make_word_table(vocab, config.word_dim, seed, vectors);
  std::mt19937_64 rng(splitmix64(seed ^ 0x726f6c6573ULL));
  if (config.use_roles) {
    t.roles = {"roles", glorot_table(kRoleCount + 1, config.role_dim, rng), true};
  }
  if (config.use_distances) {
    for (std::size_t c = 0; c < config.distance_anchors; ++c) {
      t.distances.push_back(
          {"dist" + std::to_string(c),
           glorot_table(config.distance_rows(), config.distance_dim, rng), true});
    }
  }
  return t;
}

std::size_t padded_width(std::size_t width, std::size_t heads) {
  if (heads == 0) return width;
  return (width + heads - 1) / heads * heads;
}

Tensor embed(const EncodedExample& example, const FeatureTables& tables,
             const FeatureConfig& config, std::size_t width) {
  const std::size_t len = example.length();
  std::vector<Tensor> parts;
  parts.push_back(gather_rows(tables.words.weights, example.tokens));
  if (config.use_roles) {
    if (example.roles.size() != len) {
      throw EncodingError("role features do not match token count");
    }
    parts.push_back(gather_rows(tables.roles.weights, example.roles));
  }
  if (config.use_distances) {
    if (example.distances.size() != tables.distances.size()) {
      throw EncodingError("example has " +
                          std::to_string(example.distances.size()) +
                          " distance channels, model expects " +
                          std::to_string(tables.distances.size()));
    }
    for (std::size_t c = 0; c < tables.distances.size(); ++c) {
      if (example.distances[c].size() != len) {
        throw EncodingError("distance channel length mismatch");
      }
      parts.push_back(gather_rows(tables.distances[c].weights,
                                  example.distances[c]));
    }
  }
  std::size_t used = 0;
  for (const Tensor& p : parts) used += p.dim(1);
  if (width < used) {
    throw ConfigError("embedding width " + std::to_string(width) +
                      " smaller than feature width " + std::to_string(used));
  }
  if (width > used) parts.push_back(Tensor::zeros({len, width - used}));
  return parts.size() == 1 ? parts[0] : concat(parts);
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace attnie
