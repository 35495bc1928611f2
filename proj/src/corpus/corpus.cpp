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

#include "proso/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string_view>

#include "proso/core/error.hpp"
#include "proso/core/rng.hpp"

namespace proso {

namespace {

// Punctuation recognized inside raw_text. Anything that is neither
// whitespace, nor the next annotated word, nor one of these is a mismatch.
const std::set<std::string>& punct_set() {
  static const std::set<std::string> kPunct = {
      ",", ".", "!", "?", ";", ":", "'", "\"", "(", ")", "-",
      "“", "”", "‘", "’", "…",
      "，", "。", "！", "？", "、", "；", "：",
      "（", "）", "《", "》", "「", "」"};
  return kPunct;
}

size_t codepoint_len(std::string_view s, size_t pos) {
  unsigned char c = static_cast<unsigned char>(s[pos]);
  if (c < 0x80) return 1;
  if ((c >> 5) == 0x6) return 2;
  if ((c >> 4) == 0xe) return 3;
  if ((c >> 3) == 0x1e) return 4;
  return 1;
}

WordToken make_separator() {
  WordToken w;
  w.surface = kSeparatorSymbol;
  w.kind = WordKind::kSeparator;
  w.tone = 0;
  PhonemeToken p;
  p.symbol = kSeparatorSymbol;
  p.tone_label = 0;
  p.is_separator = true;
  w.phonemes.push_back(std::move(p));
  return w;
}

}  // namespace

std::string word_kind_name(WordKind kind) {
  switch (kind) {
    case WordKind::kLexical: return "lexical";
    case WordKind::kPunctuation: return "punctuation";
    case WordKind::kSeparator: return "separator";
  }
  throw ValidationError("word_kind_name: bad enum value");
}

WordKind word_kind_from_name(const std::string& name) {
  if (name == "lexical") return WordKind::kLexical;
  if (name == "punctuation") return WordKind::kPunctuation;
  if (name == "separator") return WordKind::kSeparator;
  throw ParseError(cat("unknown word kind '", name, "'"));
}

int phoneme_count(const Utterance& utt) {
  int n = 0;
  for (const WordToken& w : utt.words) n += static_cast<int>(w.phonemes.size());
  return n;
}

std::vector<PhonemeToken> flat_phonemes(const Utterance& utt) {
  std::vector<PhonemeToken> out;
  for (const WordToken& w : utt.words)
    out.insert(out.end(), w.phonemes.begin(), w.phonemes.end());
  return out;
}

void validate_utterance(const Utterance& utt) {
  for (size_t i = 0; i < utt.words.size(); ++i) {
    const WordToken& w = utt.words[i];
    if (w.tone < 0 || w.tone > kMaxTone)
      throw ValidationError(cat(utt.id, ": word ", i, ": tone ", w.tone, " outside 0..", kMaxTone));
    switch (w.kind) {
      case WordKind::kPunctuation:
        if (!w.phonemes.empty())
          throw ValidationError(cat(utt.id, ": word ", i, ": punctuation must carry no phonemes"));
        break;
      case WordKind::kSeparator: {
        if (w.phonemes.size() != 1)
          throw ValidationError(cat(utt.id, ": word ", i, ": separator must carry one phoneme"));
        const PhonemeToken& p = w.phonemes[0];
        if (p.symbol != kSeparatorSymbol || !p.is_separator || p.tone_label != 0)
          throw ValidationError(cat(utt.id, ": word ", i, ": malformed separator phoneme"));
        if (i > 0 && utt.words[i - 1].kind == WordKind::kSeparator)
          throw ValidationError(cat(utt.id, ": consecutive separator words at ", i));
        break;
      }
      case WordKind::kLexical: {
        if (w.phonemes.empty())
          throw ValidationError(cat(utt.id, ": word ", i, ": lexical word with no phonemes"));
        for (size_t k = 0; k < w.phonemes.size(); ++k) {
          const PhonemeToken& p = w.phonemes[k];
          if (p.is_separator)
            throw ValidationError(cat(utt.id, ": word ", i, ": separator phoneme inside lexical word"));
          bool last = k + 1 == w.phonemes.size();
          if (!last && p.tone_label != 0)
            throw ValidationError(cat(utt.id, ": word ", i, ": tone on non-final phoneme"));
          if (last && p.tone_label != w.tone)
            throw ValidationError(cat(utt.id, ": word ", i, ": final phoneme tone disagrees with word tone"));
        }
        if (i > 0 && utt.words[i - 1].kind == WordKind::kLexical)
          throw ValidationError(cat(utt.id, ": adjacent lexical words at ", i, " lack a separator"));
        break;
      }
    }
  }
}

Utterance tokenize_and_separate(const std::string& raw_text,
                                const std::vector<PinyinEntry>& pinyin) {
  Utterance utt;
  utt.raw_text = raw_text;
  std::string_view text(raw_text);
  size_t pos = 0;
  size_t next_word = 0;
  bool prev_was_lexical = false;

  while (pos < text.size()) {
    char c = text[pos];
    if (c == ' ' || c == '\t') {
      ++pos;
      continue;
    }
    if (next_word < pinyin.size()) {
      const PinyinEntry& e = pinyin[next_word];
      if (!e.surface.empty() && text.substr(pos, e.surface.size()) == e.surface) {
        if (e.tone < 0 || e.tone > kMaxTone)
          throw ValidationError(cat("word ", next_word, " ('", e.surface, "'): tone ", e.tone,
                                    " outside 0..", kMaxTone));
        if (e.phoneme_symbols.empty())
          throw ValidationError(cat("word ", next_word, " ('", e.surface, "'): no phonemes"));
        if (prev_was_lexical) utt.words.push_back(make_separator());
        WordToken w;
        w.surface = e.surface;
        w.kind = WordKind::kLexical;
        w.tone = e.tone;
        for (size_t k = 0; k < e.phoneme_symbols.size(); ++k) {
          PhonemeToken p;
          p.symbol = e.phoneme_symbols[k];
          p.tone_label = (k + 1 == e.phoneme_symbols.size()) ? e.tone : 0;
          w.phonemes.push_back(std::move(p));
        }
        utt.words.push_back(std::move(w));
        pos += e.surface.size();
        ++next_word;
        prev_was_lexical = true;
        continue;
      }
    }
    size_t len = codepoint_len(text, pos);
    std::string cp(text.substr(pos, len));
    if (!punct_set().count(cp)) {
      throw ParseError(cat("text does not match annotation at word ", next_word,
                           " (byte ", pos, ", saw '", cp, "')"));
    }
    WordToken w;
    w.surface = cp;
    w.kind = WordKind::kPunctuation;
    utt.words.push_back(std::move(w));
    pos += len;
    prev_was_lexical = false;
  }
  if (next_word != pinyin.size())
    throw ParseError(cat("text ended before word ", next_word, " ('",
                         pinyin[next_word].surface, "')"));
  validate_utterance(utt);
  return utt;
}

DialogueFlagResult assign_dialogue_flags(const Utterance& utt, const QuoteConfig& quotes) {
  DialogueFlagResult res;
  res.utterance = utt;
  auto& words = res.utterance.words;

  int depth = 0;
  std::vector<bool> toggled(quotes.pairs.size(), false);
  for (WordToken& w : words) {
    if (w.kind == WordKind::kPunctuation) {
      w.dialogue_flag = 0;
      for (size_t q = 0; q < quotes.pairs.size(); ++q) {
        const auto& [open, close] = quotes.pairs[q];
        if (open == close && w.surface == open) {
          depth += toggled[q] ? -1 : 1;
          toggled[q] = !toggled[q];
          break;
        }
        if (w.surface == open) {
          ++depth;
          break;
        }
        if (w.surface == close) {
          if (depth > 0) --depth;
          break;
        }
      }
      continue;
    }
    w.dialogue_flag = depth > 0 ? 1 : 0;
  }
  if (depth > 0)
    res.warnings.push_back(cat(utt.id, ": unmatched opening quote, span extended to utterance end"));

  for (size_t i = 0; i < words.size(); ++i) {
    if (words[i].kind != WordKind::kSeparator) continue;
    int flag = 0;
    for (size_t j = i + 1; j < words.size(); ++j) {
      if (words[j].kind == WordKind::kSeparator || words[j].kind == WordKind::kPunctuation) continue;
      flag = words[j].dialogue_flag;
      break;
    }
    words[i].dialogue_flag = flag;
  }
  return res;
}

std::vector<int> assign_tone_labels(const Utterance& utt) {
  std::vector<int> tones;
  for (size_t i = 0; i < utt.words.size(); ++i) {
    const WordToken& w = utt.words[i];
    if (w.tone < 0 || w.tone > kMaxTone)
      throw ValidationError(cat(utt.id, ": word ", i, ": tone ", w.tone, " outside 0..", kMaxTone));
    for (size_t k = 0; k < w.phonemes.size(); ++k) {
      bool last = k + 1 == w.phonemes.size();
      tones.push_back(w.kind == WordKind::kLexical && last ? w.tone : 0);
    }
  }
  return tones;
}

std::pair<std::vector<Discourse>, std::vector<Discourse>> split_by_discourse(
    const std::vector<Discourse>& discourses, double test_fraction, uint64_t seed) {
  if (discourses.size() < 2)
    throw ValidationError("split_by_discourse: need at least 2 discourses");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError(cat("split_by_discourse: fraction ", test_fraction, " outside (0,1)"));

  size_t count = discourses.size();
  auto want = static_cast<long long>(std::llround(test_fraction * static_cast<double>(count)));
  size_t test_count = static_cast<size_t>(std::clamp<long long>(want, 1, static_cast<long long>(count) - 1));

  std::vector<size_t> order(count);
  for (size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<bool> in_test(count, false);
  for (size_t i = 0; i < test_count; ++i) in_test[order[i]] = true;

  std::pair<std::vector<Discourse>, std::vector<Discourse>> out;
  for (size_t i = 0; i < count; ++i)
    (in_test[i] ? out.second : out.first).push_back(discourses[i]);
  return out;
}

}  // namespace proso
