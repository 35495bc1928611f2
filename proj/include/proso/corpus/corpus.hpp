// Copyright (c) 2026 proso authors
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

#ifndef PROSO_CORPUS_CORPUS_HPP_
#define PROSO_CORPUS_CORPUS_HPP_

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "proso/corpus/types.hpp"

namespace proso {

struct PinyinEntry {
  std::string surface;
  std::vector<std::string> phoneme_symbols;
  int tone = 0;
};

// Scans raw_text against the annotated lexical words, keeps punctuation as
// zero-phoneme words, and inserts one "/" separator word between every two
// adjacent lexical words. Whitespace in raw_text is skipped.
Utterance tokenize_and_separate(const std::string& raw_text,
                                const std::vector<PinyinEntry>& pinyin);

struct QuoteConfig {
  // open/close pairs; the same string in both slots makes a toggling quote.
  std::vector<std::pair<std::string, std::string>> pairs = {
      {"“", "”"}, {"\"", "\""}};
};

// Marks words strictly inside quoted spans with dialogue_flag 1. The quote
// punctuation itself stays 0 and separators copy the flag of the word that
// follows them. An unmatched opening quote extends to the utterance end and
// raises a warning on the returned struct.
struct DialogueFlagResult {
  Utterance utterance;
  std::vector<std::string> warnings;
};
DialogueFlagResult assign_dialogue_flags(const Utterance& utt,
                                         const QuoteConfig& quotes = QuoteConfig());

// Per-phoneme tone sequence of length N: the last phoneme of each lexical
// word carries the word tone, every other position carries 0.
std::vector<int> assign_tone_labels(const Utterance& utt);

std::vector<Discourse> parse_manifest(std::istream& in);
void write_manifest(const std::vector<Discourse>& discourses, std::ostream& out);

std::vector<Discourse> load_manifest(const std::string& path);
void save_manifest(const std::vector<Discourse>& discourses, const std::string& path);

// Whole discourses only; deterministic in seed. Test size is
// round(fraction * count) clamped to [1, count-1].
std::pair<std::vector<Discourse>, std::vector<Discourse>> split_by_discourse(
    const std::vector<Discourse>& discourses, double test_fraction, uint64_t seed);

}  // namespace proso

#endif  // PROSO_CORPUS_CORPUS_HPP_
