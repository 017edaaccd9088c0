#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "straw/common.hpp"

namespace straw {

// Fixed 50-symbol vocabulary: 26 lowercase letters, 10 digits, space,
// newline, 11 punctuation marks and one catch-all symbol for everything
// else. Uppercase input folds to lowercase before mapping.
struct CharVocab {
  static constexpr int kSize = 50;
  static constexpr int kUnk = 49;

  static int encode(unsigned char ch);
  static char decode(int sym);  // '~' stands in for the catch-all symbol
};

// Wrapping symbol stream over a text corpus; yields (current, next) pairs.
struct CharStream {
  std::vector<uint8_t> syms;
  size_t pos = 0;
  uint64_t wraps = 0;

  static CharStream from_string(const std::string& text);
  static CharStream from_file(const std::string& path);

  size_t size() const { return syms.size(); }

  // Current symbol and its successor; advances by one, wrapping at the end.
  std::pair<int, int> next();
  void seek(size_t p) { pos = p % syms.size(); }
};

}  // namespace straw
