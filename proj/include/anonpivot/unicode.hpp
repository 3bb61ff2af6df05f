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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "anonpivot/unicode_tables.hpp"

/// UTF-8 codec and the small set of character classes the pipeline needs.
/// All offsets exposed by the library count Unicode scalar values.
namespace anonpivot::unicode {

class Utf8Error : public std::runtime_error {
 public:
  Utf8Error(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what + " at byte " + std::to_string(byte_offset)),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

inline std::u32string decode(std::string_view in) {
  std::u32string out;
  out.reserve(in.size());
  std::size_t i = 0;
  while (i < in.size()) {
    const auto b0 = static_cast<unsigned char>(in[i]);
    int extra = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    } else if ((b0 & 0xE0) == 0xC0) {
      extra = 1;
      cp = b0 & 0x1F;
      min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      extra = 2;
      cp = b0 & 0x0F;
      min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      extra = 3;
      cp = b0 & 0x07;
      min = 0x10000;
    } else {
      throw Utf8Error("invalid UTF-8 lead byte", i);
    }
    if (i + extra >= in.size()) {
      throw Utf8Error("truncated UTF-8 sequence", i);
    }
    for (int k = 1; k <= extra; ++k) {
      const auto b = static_cast<unsigned char>(in[i + k]);
      if ((b & 0xC0) != 0x80) throw Utf8Error("invalid UTF-8 continuation byte", i + k);
      cp = (cp << 6) | (b & 0x3F);
    }
    if (cp < min) throw Utf8Error("overlong UTF-8 sequence", i);
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw Utf8Error("UTF-8 sequence is not a scalar value", i);
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string encode(std::u32string_view in) {
  std::string out;
  out.reserve(in.size());
  for (char32_t cp : in) append_utf8(out, cp);
  return out;
}

/// Number of scalar values in a UTF-8 string.
inline std::size_t length(std::string_view utf8) { return decode(utf8).size(); }

/// White_Space property.
constexpr bool is_whitespace(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 ||
         c == 0x1680 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 ||
         c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000;
}

/// General category P* plus the spacing grave and acute accents that are
/// used as quotation marks in chat text.
inline bool is_punctuation(char32_t c) {
  const auto& t = tables::kPunctuation;
  auto it = std::upper_bound(t.begin(), t.end(), c,
                             [](char32_t v, const auto& r) { return v < r.first; });
  if (it == t.begin()) return false;
  --it;
  return c >= it->first && c <= it->second;
}

/// Characters that continue a word for whole-word matching purposes.
inline bool is_word_char(char32_t c) { return !is_whitespace(c) && !is_punctuation(c); }

/// Simple (length preserving) case folding.
inline char32_t fold(char32_t c) {
  if (c < 0x80) return (c >= 'A' && c <= 'Z') ? c + 32 : c;
  const auto& t = tables::kSimpleFold;
  auto it = std::lower_bound(t.begin(), t.end(), c,
                             [](const auto& p, char32_t v) { return p.first < v; });
  return (it != t.end() && it->first == c) ? it->second : c;
}

inline std::u32string fold(std::u32string_view s) {
  std::u32string out(s);
  for (auto& c : out) c = fold(c);
  return out;
}

inline std::string fold_utf8(std::string_view s) { return encode(fold(decode(s))); }

/// Case fold, trim, and collapse internal whitespace runs to one U+0020.
inline std::u32string normalize(std::u32string_view s) {
  std::u32string out;
  bool pending_space = false;
  for (char32_t c : s) {
    if (is_whitespace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(fold(c));
  }
  return out;
}

inline std::string normalize_utf8(std::string_view s) { return encode(normalize(decode(s))); }

/// Substring by scalar-value offsets.
inline std::string substr(std::string_view utf8, std::size_t start, std::size_t end) {
  const auto cps = decode(utf8);
  if (start > end || end > cps.size()) throw std::out_of_range("substring range outside text");
  return encode(std::u32string_view(cps).substr(start, end - start));
}

}  // namespace anonpivot::unicode
