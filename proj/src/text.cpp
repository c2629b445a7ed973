// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bfmd/text.hpp"

#include <cctype>

namespace bfmd {

namespace {

bool is_word_char(unsigned char c) {
  return std::isalnum(c) || c == '\'' || c == '-';
}

}  // namespace

bool is_punct_token(const std::string& tok) {
  return tok.size() == 1 && std::ispunct(static_cast<unsigned char>(tok[0])) &&
         tok[0] != '[';
}

std::vector<std::string> tokenize_text(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '[') {
      std::size_t close = s.find(']', i);
      if (close != std::string::npos) {
        out.push_back(s.substr(i, close - i + 1));
        i = close + 1;
        continue;
      }
      // Unclosed bracket: fall through and treat '[' as punctuation.
    }
    if (is_word_char(c)) {
      std::size_t start = i;
      while (i < n && is_word_char(static_cast<unsigned char>(s[i]))) ++i;
      std::string word = s.substr(start, i - start);
      for (char& ch : word)
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      out.push_back(std::move(word));
      continue;
    }
    out.push_back(std::string(1, s[i]));
    ++i;
  }
  return out;
}

std::string detokenize_text(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& tok : tokens) {
    if (out.empty()) {
      out = tok;
    } else if (is_punct_token(tok)) {
      out += tok;
    } else {
      out += ' ';
      out += tok;
    }
  }
  return out;
}

}  // namespace bfmd
