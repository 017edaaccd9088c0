#include "straw/charstream.hpp"

#include <array>
#include <fstream>
#include <sstream>

namespace straw {

namespace {
constexpr char kPunct[] = {'.', ',', ';', ':', '!', '?', '\'', '"', '(', ')', '-'};
constexpr int kPunctCount = 11;
constexpr int kLetters = 26, kDigits = 10;
constexpr int kSpace = kLetters + kDigits;      // 36
constexpr int kNewline = kSpace + 1;            // 37
constexpr int kPunctBase = kNewline + 1;        // 38..48
}  // namespace

int CharVocab::encode(unsigned char ch) {
  if (ch >= 'A' && ch <= 'Z') ch = static_cast<unsigned char>(ch - 'A' + 'a');
  if (ch >= 'a' && ch <= 'z') return ch - 'a';
  if (ch >= '0' && ch <= '9') return kLetters + (ch - '0');
  if (ch == ' ') return kSpace;
  if (ch == '\n') return kNewline;
  for (int i = 0; i < kPunctCount; ++i)
    if (ch == static_cast<unsigned char>(kPunct[i])) return kPunctBase + i;
  return kUnk;
}

char CharVocab::decode(int sym) {
  STRAW_CHECK(sym >= 0 && sym < kSize, "symbol out of range");
  if (sym < kLetters) return static_cast<char>('a' + sym);
  if (sym < kLetters + kDigits) return static_cast<char>('0' + (sym - kLetters));
  if (sym == kSpace) return ' ';
  if (sym == kNewline) return '\n';
  if (sym < kPunctBase + kPunctCount) return kPunct[sym - kPunctBase];
  return '~';
}

CharStream CharStream::from_string(const std::string& text) {
  STRAW_CHECK(text.size() >= 2, "corpus must contain at least two characters");
  CharStream s;
  s.syms.reserve(text.size());
  for (unsigned char ch : text) s.syms.push_back(static_cast<uint8_t>(CharVocab::encode(ch)));
  return s;
}

CharStream CharStream::from_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  STRAW_CHECK(f.good(), "cannot open corpus: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_string(ss.str());
}

std::pair<int, int> CharStream::next() {
  size_t n = syms.size();
  int cur = syms[pos];
  size_t nxt_pos = pos + 1;
  if (nxt_pos == n) {
    nxt_pos = 0;
    wraps++;
  }
  int nxt = syms[nxt_pos];
  pos = nxt_pos;
  return {cur, nxt};
}

}  // namespace straw
