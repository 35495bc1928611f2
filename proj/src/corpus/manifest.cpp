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

#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "proso/core/error.hpp"
#include "proso/corpus/corpus.hpp"

namespace proso {

namespace {

using nlohmann::json;

json require_field(const json& rec, const char* key, int line) {
  auto it = rec.find(key);
  if (it == rec.end())
    throw ParseError(cat("manifest line ", line, ": missing field '", key, "'"));
  return *it;
}

int require_int(const json& rec, const char* key, int line) {
  json v = require_field(rec, key, line);
  if (!v.is_number_integer())
    throw ParseError(cat("manifest line ", line, ": field '", key, "' must be an integer"));
  return v.get<int>();
}

std::string require_str(const json& rec, const char* key, int line) {
  json v = require_field(rec, key, line);
  if (!v.is_string())
    throw ParseError(cat("manifest line ", line, ": field '", key, "' must be a string"));
  return v.get<std::string>();
}

WordToken parse_word(const json& jw, int line) {
  if (!jw.is_object())
    throw ParseError(cat("manifest line ", line, ": word entries must be objects"));
  WordToken w;
  w.surface = require_str(jw, "surface", line);
  w.kind = word_kind_from_name(require_str(jw, "kind", line));
  w.tone = require_int(jw, "tone", line);
  json syms = require_field(jw, "phoneme_symbols", line);
  if (!syms.is_array())
    throw ParseError(cat("manifest line ", line, ": phoneme_symbols must be an array"));
  size_t count = syms.size();
  for (size_t k = 0; k < count; ++k) {
    if (!syms[k].is_string())
      throw ParseError(cat("manifest line ", line, ": phoneme_symbols must hold strings"));
    PhonemeToken p;
    p.symbol = syms[k].get<std::string>();
    if (w.kind == WordKind::kSeparator) {
      p.is_separator = true;
    } else if (w.kind == WordKind::kLexical && k + 1 == count) {
      p.tone_label = w.tone;
    }
    w.phonemes.push_back(std::move(p));
  }
  return w;
}

}  // namespace

std::vector<Discourse> parse_manifest(std::istream& in) {
  std::vector<Discourse> discourses;
  std::set<std::string> closed_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object())
      throw ParseError(cat("manifest line ", line_no, ": not a valid record"));

    Utterance utt;
    std::string did = require_str(rec, "discourse_id", line_no);
    int index = require_int(rec, "utterance_index", line_no);
    utt.speaker_id = require_int(rec, "speaker_id", line_no);
    utt.style_label = require_int(rec, "style_id", line_no);
    utt.raw_text = require_str(rec, "raw_text", line_no);
    if (did.empty()) throw ParseError(cat("manifest line ", line_no, ": empty discourse_id"));
    if (utt.speaker_id < 0)
      throw ParseError(cat("manifest line ", line_no, ": unknown speaker id ", utt.speaker_id));
    if (utt.style_label < 0)
      throw ParseError(cat("manifest line ", line_no, ": unknown style id ", utt.style_label));

    json words = require_field(rec, "words", line_no);
    if (!words.is_array())
      throw ParseError(cat("manifest line ", line_no, ": words must be an array"));
    for (const json& jw : words) utt.words.push_back(parse_word(jw, line_no));

    if (discourses.empty() || discourses.back().id != did) {
      if (closed_ids.count(did))
        throw ParseError(cat("manifest line ", line_no, ": discourse '", did,
                             "' records are not contiguous"));
      if (!discourses.empty()) closed_ids.insert(discourses.back().id);
      Discourse d;
      d.id = did;
      d.style_label = utt.style_label;
      discourses.push_back(std::move(d));
    }
    Discourse& d = discourses.back();
    int expect = static_cast<int>(d.utterances.size());
    if (index != expect)
      throw ParseError(cat("manifest line ", line_no, ": utterance_index ", index,
                           " (expected ", expect, ", duplicate or out of order)"));
    utt.id = cat(did, "_", index);

    try {
      validate_utterance(utt);
    } catch (const ValidationError& e) {
      throw ParseError(cat("manifest line ", line_no, ": ", e.what()));
    }
    DialogueFlagResult flagged = assign_dialogue_flags(utt);
    d.utterances.push_back(std::move(flagged.utterance));
  }
  return discourses;
}

void write_manifest(const std::vector<Discourse>& discourses, std::ostream& out) {
  for (const Discourse& d : discourses) {
    for (size_t i = 0; i < d.utterances.size(); ++i) {
      const Utterance& utt = d.utterances[i];
      json rec;
      rec["discourse_id"] = d.id;
      rec["utterance_index"] = static_cast<int>(i);
      rec["speaker_id"] = utt.speaker_id;
      rec["style_id"] = utt.style_label;
      rec["raw_text"] = utt.raw_text;
      json words = json::array();
      for (const WordToken& w : utt.words) {
        json jw;
        jw["surface"] = w.surface;
        jw["kind"] = word_kind_name(w.kind);
        jw["tone"] = w.tone;
        json syms = json::array();
        for (const PhonemeToken& p : w.phonemes) syms.push_back(p.symbol);
        jw["phoneme_symbols"] = syms;
        words.push_back(std::move(jw));
      }
      rec["words"] = std::move(words);
      out << rec.dump() << "\n";
    }
  }
}

std::vector<Discourse> load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(cat("cannot open manifest: ", path));
  return parse_manifest(in);
}

void save_manifest(const std::vector<Discourse>& discourses, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(cat("cannot open manifest for writing: ", path));
  write_manifest(discourses, out);
  out.flush();
  if (!out) throw Error(cat("manifest write failed: ", path));
}

}  // namespace proso
