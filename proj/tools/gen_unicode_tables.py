#!/usr/bin/env python3
# Copyright 2026 The anonpivot Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates include/anonpivot/unicode_tables.hpp from Python's unicodedata."""

import sys
import unicodedata

LICENSE = """\
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
"""

EXTRA_QUOTES = {0x60, 0xB4}


def ranges(pred):
    out = []
    start = None
    for cp in range(0x110000):
        if pred(cp):
            if start is None:
                start = cp
        elif start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out


def is_punct(cp):
    if 0xD800 <= cp <= 0xDFFF:
        return False
    return unicodedata.category(chr(cp)).startswith("P") or cp in EXTRA_QUOTES


def fold_pairs():
    pairs = []
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        c = chr(cp)
        f = c.casefold()
        if len(f) != 1:
            f = c.lower()
        if len(f) == 1 and f != c:
            pairs.append((cp, ord(f)))
    return pairs


def main():
    punct = ranges(is_punct)
    folds = fold_pairs()
    w = sys.stdout.write
    w(LICENSE + "\n")
    w("// Generated by tools/gen_unicode_tables.py (Unicode %s). Do not edit.\n"
      % unicodedata.unidata_version)
    w("#pragma once\n\n#include <array>\n#include <utility>\n\n")
    w("namespace anonpivot::unicode::tables {\n\n")
    w("inline constexpr std::array<std::pair<char32_t, char32_t>, %d> kPunctuation{{\n"
      % len(punct))
    for a, b in punct:
        w("    {0x%04X, 0x%04X},\n" % (a, b))
    w("}};\n\n")
    w("inline constexpr std::array<std::pair<char32_t, char32_t>, %d> kSimpleFold{{\n"
      % len(folds))
    for a, b in folds:
        w("    {0x%04X, 0x%04X},\n" % (a, b))
    w("}};\n\n}  // namespace anonpivot::unicode::tables\n")


if __name__ == "__main__":
    main()
