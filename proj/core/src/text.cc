#include "attnie/text.h"

#include <algorithm>

namespace attnie {
namespace {

// Length in bytes of the whitespace code point starting at text[i], or 0.
std::size_t whitespace_length(std::string_view text, std::size_t i) {
  const auto c = static_cast<unsigned char>(text[i]);
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
      c == '\f') {
    return 1;
  }
  auto byte = [&](std::size_t k) {
    return i + k < text.size() ? static_cast<unsigned char>(text[i + k]) : 0;
  };
  if (c == 0xC2 && byte(1) == 0xA0) return 2;  // U+00A0
  if (c == 0xE2 && byte(1) == 0x80) {
    const unsigned char b = byte(2);
    if ((b >= 0x80 && b <= 0x8A) || b == 0xA8 || b == 0xA9 || b == 0xAF) {
      return 3;
    }
  }
  if (c == 0xE2 && byte(1) == 0x81 && byte(2) == 0x9F) return 3;  // U+205F
  if (c == 0xE3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;  // U+3000
  return 0;
}

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) ||
         (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

}  // namespace

std::vector<Token> tokenize(std::string_view text, std::size_t offset) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  std::size_t start = std::string_view::npos;
  auto flush = [&](std::size_t end) {
    if (start != std::string_view::npos && end > start) {
      tokens.push_back({std::string(text.substr(start, end - start)),
                        offset + start, offset + end});
    }
    start = std::string_view::npos;
  };
  while (i < text.size()) {
    if (std::size_t ws = whitespace_length(text, i)) {
      flush(i);
      i += ws;
      continue;
    }
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_ascii_punct(c)) {
      flush(i);
      tokens.push_back({std::string(1, text[i]), offset + i, offset + i + 1});
      ++i;
      continue;
    }
    if (start == std::string_view::npos) start = i;
    ++i;
  }
  flush(text.size());
  return tokens;
}

std::vector<Sentence> split_sentences(
    std::string_view text,
    std::span<const std::pair<std::size_t, std::size_t>> protected_spans) {
  auto inside_span = [&](std::size_t pos) {
    return std::any_of(protected_spans.begin(), protected_spans.end(),
                       [pos](const auto& s) {
                         return s.first < pos && pos < s.second;
                       });
  };
  std::vector<std::size_t> cuts;  // exclusive end of each sentence
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    std::size_t cut = std::string_view::npos;
    if (c == '\n') {
      cut = i;
    } else if ((c == '.' || c == '!' || c == '?') &&
               (i + 1 == text.size() || whitespace_length(text, i + 1) > 0)) {
      cut = i + 1;
    }
    if (cut != std::string_view::npos && !inside_span(cut)) cuts.push_back(cut);
  }
  cuts.push_back(text.size());

  std::vector<Sentence> sentences;
  std::size_t begin = 0;
  for (std::size_t cut : cuts) {
    if (cut < begin) continue;
    Sentence s;
    s.tokens = tokenize(text.substr(begin, cut - begin), begin);
    if (!s.tokens.empty()) {
      s.begin = s.tokens.front().begin;
      s.end = s.tokens.back().end;
      sentences.push_back(std::move(s));
    }
    begin = cut;
  }
  return sentences;
}

std::pair<std::size_t, std::size_t> token_range(const Sentence& sentence,
                                                std::size_t begin,
                                                std::size_t end) {
  std::size_t first = sentence.tokens.size(), last = 0;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    const Token& t = sentence.tokens[i];
    if (t.begin < end && begin < t.end) {
      first = std::min(first, i);
      last = i + 1;
    }
  }
  if (first >= last) return {0, 0};
  return {first, last};
}

}  // namespace attnie
