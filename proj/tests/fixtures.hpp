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

#ifndef PROSO_TESTS_FIXTURES_HPP_
#define PROSO_TESTS_FIXTURES_HPP_

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "proso/core/rng.hpp"
#include "proso/corpus/types.hpp"
#include "proso/features/features.hpp"

namespace proso::testutil {

inline WordToken lex(const std::string& surface, const std::vector<std::string>& phonemes,
                     int tone, int dia = 0) {
  WordToken w;
  w.surface = surface;
  w.kind = WordKind::kLexical;
  w.tone = tone;
  w.dialogue_flag = dia;
  for (size_t i = 0; i < phonemes.size(); ++i) {
    PhonemeToken p;
    p.symbol = phonemes[i];
    p.tone_label = (i + 1 == phonemes.size()) ? tone : 0;
    w.phonemes.push_back(p);
  }
  return w;
}

inline WordToken sep(int dia = 0) {
  WordToken w;
  w.surface = kSeparatorSymbol;
  w.kind = WordKind::kSeparator;
  w.dialogue_flag = dia;
  PhonemeToken p;
  p.symbol = kSeparatorSymbol;
  p.is_separator = true;
  w.phonemes.push_back(p);
  return w;
}

inline WordToken punct(const std::string& surface) {
  WordToken w;
  w.surface = surface;
  w.kind = WordKind::kPunctuation;
  return w;
}

inline Utterance make_utt(const std::string& id, std::vector<WordToken> words, int speaker = 0,
                          int style = 0) {
  Utterance u;
  u.id = id;
  u.words = std::move(words);
  u.speaker_id = speaker;
  u.style_label = style;
  return u;
}

// Sorted unique phoneme symbols of the utterances, separator included.
inline std::vector<std::string> alphabet_of(const std::vector<Utterance>& utts) {
  std::set<std::string> syms;
  for (const Utterance& u : utts)
    for (const WordToken& w : u.words)
      for (const PhonemeToken& p : w.phonemes) syms.insert(p.symbol);
  return {syms.begin(), syms.end()};
}

// Random well-formed utterance: lexical words from a fixed surface pool with
// random phoneme strings, separators between adjacent lexical words, random
// punctuation, random tones and dialogue flags.
inline Utterance random_utt(Rng& rng, const std::string& id, int max_words = 6,
                            int max_phonemes = 4, int speaker = 0, int style = 0) {
  static const std::vector<std::string> kSurfaces = {"wa", "wb", "wc", "wd", "we",
                                                     "wf", "wg", "wh", "wi", "wj"};
  static const std::vector<std::string> kPhonemes = {"p0", "p1", "p2", "p3",
                                                     "p4", "p5", "p6", "p7"};
  std::vector<WordToken> words;
  int n_words = rng.range(1, max_words);
  bool prev_lexical = false;
  for (int i = 0; i < n_words; ++i) {
    if (rng.chance(0.2) && !words.empty()) {
      words.push_back(punct(rng.chance(0.5) ? "," : "."));
      prev_lexical = false;
      continue;
    }
    int dia = rng.chance(0.3) ? 1 : 0;
    if (prev_lexical) words.push_back(sep(dia));
    std::vector<std::string> phones;
    int np = rng.range(1, max_phonemes);
    for (int p = 0; p < np; ++p) phones.push_back(kPhonemes[rng.below(kPhonemes.size())]);
    words.push_back(lex(kSurfaces[rng.below(kSurfaces.size())], phones, rng.range(1, 5), dia));
    prev_lexical = true;
  }
  if (words.empty() || phoneme_count(make_utt(id, words)) == 0)
    words.push_back(lex("wa", {"p0"}, 1));
  return make_utt(id, std::move(words), speaker, style);
}

// Random targets of matching length; separator rows may be non-silent
// (all-zero 5-dim signature).
// Fills per-phoneme targets and keeps the utterance's separator silence
// flags consistent with them (nonzero separator rows imply is_silent).
inline PhonemeTargets random_targets(Rng& rng, Utterance& utt) {
  PhonemeTargets t;
  t.utterance_id = utt.id;
  for (WordToken& w : utt.words) {
    for (PhonemeToken& p : w.phonemes) {
      if (p.is_separator && rng.chance(0.4)) {
        p.is_silent = false;
        t.pitch.push_back(0.0);
        t.energy.push_back(0.0);
        t.lpe.push_back({0.0, 0.0, 0.0});
      } else {
        if (p.is_separator) p.is_silent = true;
        t.pitch.push_back(rng.uniform(4.0, 6.0));
        t.energy.push_back(rng.uniform(0.1, 2.0));
        t.lpe.push_back({rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95),
                         rng.uniform(0.05, 0.95)});
      }
    }
  }
  return t;
}

}  // namespace proso::testutil

#endif  // PROSO_TESTS_FIXTURES_HPP_
