#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace attnie {

// Byte offsets into the source text, half open.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct Sentence {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<Token> tokens;
};

// Splits on ASCII and common Unicode whitespace, then breaks every ASCII
// punctuation character (hyphen and slash included) into its own token.
// `offset` is added to every reported position.
std::vector<Token> tokenize(std::string_view text, std::size_t offset = 0);

// Sentence boundaries after '.', '!' or '?' followed by whitespace, and at
// newlines. A boundary that would cut through one of `protected_spans`
// ([begin,end) byte ranges) is skipped.
std::vector<Sentence> split_sentences(
    std::string_view text,
    std::span<const std::pair<std::size_t, std::size_t>> protected_spans = {});

// Tokens of `sentence` overlapping [begin,end), as a token index range.
// Returns {0,0} when nothing overlaps.
std::pair<std::size_t, std::size_t> token_range(const Sentence& sentence,
                                                std::size_t begin,
                                                std::size_t end);

}  // namespace attnie
