// Copyright 2026 The anonpivot Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "anonpivot/unicode.hpp"

namespace anonpivot {

/// A word is a maximal run of non-whitespace scalar values.
struct WordRange {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const WordRange&, const WordRange&) = default;
};

inline std::vector<WordRange> split_words(std::u32string_view text) {
  std::vector<WordRange> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && unicode::is_whitespace(text[i])) ++i;
    if (i == text.size()) break;
    const std::size_t start = i;
    while (i < text.size() && !unicode::is_whitespace(text[i])) ++i;
    words.push_back({start, i});
  }
  return words;
}

inline std::vector<WordRange> split_words_utf8(std::string_view text) {
  return split_words(unicode::decode(text));
}

inline std::vector<std::u32string> word_tokens(std::u32string_view text) {
  std::vector<std::u32string> out;
  for (auto w : split_words(text)) out.emplace_back(text.substr(w.start, w.end - w.start));
  return out;
}

inline std::size_t word_count(std::string_view utf8) { return split_words_utf8(utf8).size(); }

}  // namespace anonpivot
