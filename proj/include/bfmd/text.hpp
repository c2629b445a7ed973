// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace bfmd {

// Surface tokenization shared by the vocabulary, caption statistics, keyword
// matching and metrics, so every consumer sees the same normalization:
//   - lowercased, whitespace split
//   - punctuation detached as single-character tokens
//   - bracketed specials like "[PLAYER]" kept verbatim as one token
//   - apostrophes and internal hyphens stay inside their word
std::vector<std::string> tokenize_text(const std::string& s);

// Inverse up to casing/whitespace normalization: punctuation tokens are
// attached to the preceding token, everything else is space-joined.
std::string detokenize_text(const std::vector<std::string>& tokens);

bool is_punct_token(const std::string& tok);

}  // namespace bfmd
