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

#ifndef PROSO_CORPUS_TYPES_HPP_
#define PROSO_CORPUS_TYPES_HPP_

#include <string>
#include <vector>

namespace proso {

inline constexpr const char* kSeparatorSymbol = "/";
inline constexpr int kMaxTone = 5;

struct PhonemeToken {
  std::string symbol;
  int tone_label = 0;  // 0 unset, 1..4 tones, 5 neutral
  bool is_separator = false;
  bool is_silent = false;  // separators only, filled by feature extraction

  friend bool operator==(const PhonemeToken&, const PhonemeToken&) = default;
};

enum class WordKind { kLexical, kPunctuation, kSeparator };

std::string word_kind_name(WordKind kind);
WordKind word_kind_from_name(const std::string& name);

struct WordToken {
  std::string surface;
  WordKind kind = WordKind::kLexical;
  std::vector<PhonemeToken> phonemes;
  int tone = 0;
  int dialogue_flag = 0;

  friend bool operator==(const WordToken&, const WordToken&) = default;
};

struct Utterance {
  std::string id;
  std::vector<WordToken> words;
  int speaker_id = 0;
  int style_label = 0;
  std::string raw_text;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Discourse {
  std::string id;
  std::vector<Utterance> utterances;
  int style_label = 0;

  friend bool operator==(const Discourse&, const Discourse&) = default;
};

// N: total phoneme count over all words, separators included.
int phoneme_count(const Utterance& utt);

// All phoneme tokens in reading order, length N.
std::vector<PhonemeToken> flat_phonemes(const Utterance& utt);

// Checks the structural rules of the word/phoneme data model and throws
// ValidationError on the first violation.
void validate_utterance(const Utterance& utt);

}  // namespace proso

#endif  // PROSO_CORPUS_TYPES_HPP_
