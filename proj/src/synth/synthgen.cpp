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

#include "proso/synth/synthgen.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "proso/core/error.hpp"
#include "proso/core/rng.hpp"
#include "proso/core/text.hpp"
#include "proso/corpus/corpus.hpp"
#include "proso/model/umpm.hpp"

namespace proso {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kPitchBase = 5.0;
constexpr double kPitchSpeakerCoeff = 0.3;
constexpr double kPitchToneCoeff = 0.05;
constexpr double kEnergyBase = 1.5;
constexpr double kEnergyDialogueCoeff = 0.1;
constexpr double kSilenceEnergy = 0.05;
constexpr double kQuoteChance = 0.3;
constexpr double kCommaChance = 0.15;
constexpr double kPauseChance = 0.5;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Law parameter tables, drawn once per spec from the "law" stream. Draw
// order is fixed: pronunciations, word coefficients, phoneme coefficients,
// tone, dialogue, pitch, energy.
struct LawTables {
  std::vector<std::string> alphabet;
  std::vector<std::string> style_surfaces;
  std::string cue_plus = "cp";
  std::string cue_minus = "cm";
  std::vector<std::string> body_surfaces;
  std::vector<std::string> all_surfaces;
  std::map<std::string, std::vector<std::string>> pron;
  std::map<std::string, std::array<double, 3>> word_coeff;
  std::map<std::string, std::array<double, 3>> phon_coeff;
  std::array<double, 3> tone_coeff{};
  std::array<double, 3> dia_coeff{};
  std::map<std::string, double> pitch_coeff;
  std::map<std::string, double> energy_coeff;
  double lo = 0.0;
  double span = 1.0;
  double beta = 0.0;
};

LawTables build_law_tables(const GeneratorSpec& spec) {
  Rng rng(Rng::derive(spec.seed, "law"));
  LawTables t;
  for (int k = 0; k < spec.phoneme_alphabet_size; ++k)
    t.alphabet.push_back(cat("p", k));
  for (int s = 0; s < spec.num_styles; ++s)
    t.style_surfaces.push_back(cat("s", s));
  for (int v = 0; v < spec.vocab_size; ++v)
    t.body_surfaces.push_back(cat("w", v));

  auto draw_pron = [&] {
    std::vector<std::string> symbols;
    int len = rng.range(1, 3);
    for (int i = 0; i < len; ++i)
      symbols.push_back(t.alphabet[rng.below(t.alphabet.size())]);
    return symbols;
  };
  // Even/odd body pairs share a pronunciation so the word identity is not
  // recoverable from the phoneme path alone.
  for (int v = 0; v < spec.vocab_size; v += 2) {
    std::vector<std::string> symbols = draw_pron();
    t.pron[t.body_surfaces[v]] = symbols;
    if (v + 1 < spec.vocab_size) t.pron[t.body_surfaces[v + 1]] = symbols;
  }
  for (const std::string& s : t.style_surfaces) t.pron[s] = draw_pron();
  t.pron[t.cue_plus] = draw_pron();
  t.pron[t.cue_minus] = draw_pron();

  t.all_surfaces = t.body_surfaces;
  t.all_surfaces.insert(t.all_surfaces.end(), t.style_surfaces.begin(), t.style_surfaces.end());
  t.all_surfaces.push_back(t.cue_plus);
  t.all_surfaces.push_back(t.cue_minus);

  for (const std::string& s : t.all_surfaces) {
    std::array<double, 3> row;
    for (double& v : row) v = rng.uniform(-1.5, 1.5);
    t.word_coeff[s] = row;
  }
  std::vector<std::string> phon_keys = t.alphabet;
  phon_keys.push_back(kSeparatorSymbol);
  for (const std::string& s : phon_keys) {
    std::array<double, 3> row;
    for (double& v : row) v = rng.uniform(-1.5, 1.5);
    t.phon_coeff[s] = row;
  }
  for (double& v : t.tone_coeff) v = rng.uniform(-0.25, 0.25);
  for (double& v : t.dia_coeff) v = rng.uniform(-0.75, 0.75);
  for (const std::string& s : t.alphabet) t.pitch_coeff[s] = rng.uniform(-0.5, 0.5);
  for (const std::string& s : t.alphabet) t.energy_coeff[s] = rng.uniform(0.0, 1.0);

  switch (spec.target_law) {
    case TargetLaw::kWordDependent:
    case TargetLaw::kPhonemeDependent:
      t.lo = 0.0;
      t.span = 1.0;
      t.beta = 0.0;
      break;
    case TargetLaw::kContextOffset:
      t.lo = 0.3;
      t.span = 0.4;
      t.beta = 0.15;
      break;
    case TargetLaw::kMixed:
      t.lo = 0.25;
      t.span = 0.5;
      t.beta = 0.1;
      break;
  }
  return t;
}

std::array<double, 3> law_row(const LawTables& t, TargetLaw law, const std::string& word,
                              int tone, int dia, const std::string& phoneme, double delta) {
  std::array<double, 3> out;
  for (int c = 0; c < 3; ++c) {
    double z;
    if (law == TargetLaw::kWordDependent || law == TargetLaw::kMixed) {
      z = t.word_coeff.at(word)[c] + t.tone_coeff[c] * tone + t.dia_coeff[c] * dia;
    } else {
      z = t.phon_coeff.at(phoneme)[c] + t.tone_coeff[c] * tone;
    }
    out[c] = t.lo + t.span * sigmoid(z) + delta;
  }
  return out;
}

// One LPE row per phoneme. Separator rows inherit the preceding lexical
// word's identity and dialogue flag (what the length regulator copies) and
// use tone 0 and the separator symbol.
std::vector<std::array<double, 3>> law_lpe_rows(const LawTables& t, TargetLaw law,
                                                const Utterance& utt, double delta) {
  std::vector<std::array<double, 3>> rows;
  const WordToken* prev_lexical = nullptr;
  for (const WordToken& w : utt.words) {
    if (w.kind == WordKind::kSeparator) {
      if (prev_lexical == nullptr)
        throw ValidationError(cat(utt.id, ": separator before any lexical word"));
      rows.push_back(law_row(t, law, prev_lexical->surface, 0, prev_lexical->dialogue_flag,
                             kSeparatorSymbol, delta));
      continue;
    }
    for (const PhonemeToken& p : w.phonemes)
      rows.push_back(law_row(t, law, w.surface, p.tone_label, w.dialogue_flag, p.symbol, delta));
    if (w.kind == WordKind::kLexical) prev_lexical = &w;
  }
  return rows;
}

WordToken make_lexical(const LawTables& t, const std::string& surface, int tone) {
  WordToken w;
  w.surface = surface;
  w.kind = WordKind::kLexical;
  w.tone = tone;
  const std::vector<std::string>& symbols = t.pron.at(surface);
  for (size_t k = 0; k < symbols.size(); ++k) {
    PhonemeToken p;
    p.symbol = symbols[k];
    p.tone_label = (k + 1 == symbols.size()) ? tone : 0;
    w.phonemes.push_back(std::move(p));
  }
  return w;
}

WordToken make_punct(const std::string& surface) {
  WordToken w;
  w.surface = surface;
  w.kind = WordKind::kPunctuation;
  return w;
}

WordToken make_sep() {
  WordToken w;
  w.surface = kSeparatorSymbol;
  w.kind = WordKind::kSeparator;
  PhonemeToken p;
  p.symbol = kSeparatorSymbol;
  p.is_separator = true;
  w.phonemes.push_back(std::move(p));
  return w;
}

// Text draw order per utterance: speaker, body count, body word ids, quote
// flag and span, comma flags, cue pick, then one tone per lexical word in
// reading order.
struct UtteranceText {
  Utterance utt;
  int cue_sign = 0;  // +1 or -1 on offset laws, 0 otherwise
};

UtteranceText build_text(const GeneratorSpec& spec, const LawTables& t, Rng& rng,
                         const std::string& discourse_id, int index, int style) {
  UtteranceText out;
  Utterance& utt = out.utt;
  utt.id = cat(discourse_id, "_", index);
  utt.speaker_id = static_cast<int>(rng.below(spec.num_speakers));
  utt.style_label = style;

  int n_body = rng.range(3, 6);
  std::vector<int> body_ids;
  for (int b = 0; b < n_body; ++b)
    body_ids.push_back(static_cast<int>(rng.below(spec.vocab_size)));
  bool quoted = rng.chance(kQuoteChance) && n_body >= 2;
  int qi = 0, qj = 0;
  if (quoted) {
    qi = static_cast<int>(rng.below(n_body));
    qj = qi + static_cast<int>(rng.below(n_body - qi));
  }
  std::vector<bool> comma(std::max(0, n_body - 1), false);
  for (int b = 0; b + 1 < n_body; ++b) comma[b] = rng.chance(kCommaChance);
  bool offset_law =
      spec.target_law == TargetLaw::kContextOffset || spec.target_law == TargetLaw::kMixed;
  if (offset_law) out.cue_sign = rng.chance(0.5) ? 1 : -1;

  auto draw_tone = [&] { return rng.range(1, kMaxTone); };

  bool prev_lexical = false;
  auto push_lexical = [&](const std::string& surface) {
    if (prev_lexical) utt.words.push_back(make_sep());
    utt.words.push_back(make_lexical(t, surface, draw_tone()));
    prev_lexical = true;
  };

  push_lexical(t.style_surfaces[style]);
  for (int b = 0; b < n_body; ++b) {
    if (quoted && b == qi) {
      utt.words.push_back(make_punct("“"));
      prev_lexical = false;
    }
    push_lexical(t.body_surfaces[body_ids[b]]);
    if (quoted && b == qj) {
      utt.words.push_back(make_punct("”"));
      prev_lexical = false;
    } else if (b + 1 < n_body && comma[b]) {
      utt.words.push_back(make_punct(","));
      prev_lexical = false;
    }
  }
  if (offset_law) push_lexical(out.cue_sign > 0 ? t.cue_plus : t.cue_minus);
  utt.words.push_back(make_punct("."));

  std::string text;
  for (const WordToken& w : utt.words) {
    if (w.kind == WordKind::kSeparator) continue;
    if (!text.empty()) text += " ";
    text += w.surface;
  }
  utt.raw_text = text;
  validate_utterance(utt);
  return out;
}

// Frame draw order per utterance: per lexical phoneme a duration, per
// separator a silence flag then a duration, per punctuation word (when the
// previous interval is not already silence) a pause flag then a duration.
struct Acoustics {
  FrameTrack frames;
  AlignmentTrack align;
};

Acoustics build_acoustics(const LawTables& t, const Utterance& utt, Rng& rng) {
  Acoustics out;
  out.frames.utterance_id = utt.id;
  out.align.utterance_id = utt.id;
  int cursor = 0;
  bool prev_silence = false;

  auto push_frames = [&](const std::string& label, int frames, double f0, double energy) {
    out.align.intervals.push_back({label, cursor, cursor + frames});
    for (int f = 0; f < frames; ++f) {
      out.frames.f0_hz.push_back(f0);
      out.frames.energy.push_back(energy);
    }
    cursor += frames;
  };

  for (const WordToken& w : utt.words) {
    switch (w.kind) {
      case WordKind::kLexical:
        for (const PhonemeToken& p : w.phonemes) {
          int dur = rng.range(6, 12);
          double pitch = kPitchBase + kPitchSpeakerCoeff * utt.speaker_id +
                         kPitchToneCoeff * p.tone_label + t.pitch_coeff.at(p.symbol);
          double energy = kEnergyBase + kEnergyDialogueCoeff * w.dialogue_flag +
                          0.5 * t.energy_coeff.at(p.symbol);
          push_frames(p.symbol, dur, std::exp(pitch), energy);
          prev_silence = false;
        }
        break;
      case WordKind::kSeparator:
        if (rng.chance(kPauseChance)) {
          push_frames(kSilenceLabel, rng.range(3, 6), 0.0, kSilenceEnergy);
          prev_silence = true;
        }
        break;
      case WordKind::kPunctuation:
        if (!prev_silence && rng.chance(kPauseChance)) {
          push_frames(kSilenceLabel, rng.range(2, 4), 0.0, kSilenceEnergy);
          prev_silence = true;
        }
        break;
    }
  }
  return out;
}

json law_json(const GeneratorSpec& spec, const LawTables& t, double offset_mse_gap) {
  json j;
  j["law"] = target_law_name(spec.target_law);
  j["spec"] = {{"num_discourses", spec.num_discourses},
               {"utterances_per_discourse", spec.utterances_per_discourse},
               {"vocab_size", spec.vocab_size},
               {"phoneme_alphabet_size", spec.phoneme_alphabet_size},
               {"num_speakers", spec.num_speakers},
               {"num_styles", spec.num_styles},
               {"seed", spec.seed}};
  j["squash"] = {{"lo", t.lo}, {"span", t.span}};
  j["beta"] = t.beta;
  j["offset_mse_gap"] = offset_mse_gap;
  j["offset_rule"] =
      "delta(u) = beta * cue_sign(utterance (u-1) mod m); cue word is the last lexical word";
  j["separator_rule"] =
      "separator rows use the preceding lexical word's identity and dialogue flag, tone 0";
  j["cue_words"] = {{"plus", t.cue_plus}, {"minus", t.cue_minus}};
  j["style_words"] = t.style_surfaces;
  j["tone_coeff"] = t.tone_coeff;
  j["dialogue_coeff"] = t.dia_coeff;
  j["word_coeff"] = t.word_coeff;
  j["phoneme_coeff"] = t.phon_coeff;
  j["pitch"] = {{"base", kPitchBase},
                {"speaker_coeff", kPitchSpeakerCoeff},
                {"tone_coeff", kPitchToneCoeff},
                {"phoneme_coeff", t.pitch_coeff}};
  j["energy"] = {{"base", kEnergyBase},
                 {"dialogue_coeff", kEnergyDialogueCoeff},
                 {"phoneme_scale", 0.5},
                 {"phoneme_coeff", t.energy_coeff},
                 {"silence_floor", kSilenceEnergy}};
  json vocab = json::array();
  for (const std::string& s : t.all_surfaces)
    vocab.push_back({{"surface", s}, {"phonemes", t.pron.at(s)}});
  j["vocab"] = vocab;
  return j;
}

template <typename WriteFn>
void write_with(const fs::path& path, WriteFn fn) {
  std::ostringstream out;
  fn(out);
  write_file(path.string(), out.str());
}

}  // namespace

std::string target_law_name(TargetLaw law) {
  switch (law) {
    case TargetLaw::kWordDependent: return "word_dependent";
    case TargetLaw::kPhonemeDependent: return "phoneme_dependent";
    case TargetLaw::kContextOffset: return "context_offset";
    case TargetLaw::kMixed: return "mixed";
  }
  throw ValidationError("unknown target law");
}

TargetLaw target_law_from_name(const std::string& name) {
  if (name == "word_dependent") return TargetLaw::kWordDependent;
  if (name == "phoneme_dependent") return TargetLaw::kPhonemeDependent;
  if (name == "context_offset") return TargetLaw::kContextOffset;
  if (name == "mixed") return TargetLaw::kMixed;
  throw ValidationError(cat("unknown target law '", name,
                            "'; expected word_dependent, phoneme_dependent, "
                            "context_offset or mixed"));
}

void validate_generator_spec(const GeneratorSpec& spec) {
  if (spec.num_discourses < 1 || spec.utterances_per_discourse < 1)
    throw ValidationError("generator spec: discourse and utterance counts must be positive");
  if (spec.vocab_size < 1) throw ValidationError("generator spec: vocab_size must be positive");
  if (spec.phoneme_alphabet_size < 1)
    throw ValidationError("generator spec: phoneme_alphabet_size must be positive");
  if (spec.num_speakers < 1)
    throw ValidationError("generator spec: num_speakers must be positive");
  if (spec.num_styles < 2) throw ValidationError("generator spec: need at least 2 styles");
}

GenerateResult generate(const GeneratorSpec& spec, const std::string& out_dir) {
  validate_generator_spec(spec);
  fs::path root(out_dir);
  if (fs::exists(root)) {
    if (!fs::is_directory(root))
      throw ValidationError(cat("output path '", out_dir, "' is not a directory"));
    if (!fs::is_empty(root))
      throw ValidationError(cat("output directory '", out_dir, "' is not empty"));
  }
  fs::create_directories(root / "frames");
  fs::create_directories(root / "align");
  fs::create_directories(root / "lpe");

  LawTables tables = build_law_tables(spec);
  bool offset_law =
      spec.target_law == TargetLaw::kContextOffset || spec.target_law == TargetLaw::kMixed;
  double gap = offset_law ? tables.beta * tables.beta : 0.0;

  int m = spec.utterances_per_discourse;
  std::vector<Discourse> discourses;
  for (int d = 0; d < spec.num_discourses; ++d) {
    Discourse disc;
    disc.id = cat("d", d);
    Rng cast(Rng::derive(spec.seed, "cast", static_cast<uint64_t>(d)));
    disc.style_label = static_cast<int>(cast.below(spec.num_styles));

    std::vector<UtteranceText> texts;
    for (int u = 0; u < m; ++u) {
      uint64_t gid = static_cast<uint64_t>(d) * m + u;
      Rng rng(Rng::derive(spec.seed, "text", gid));
      texts.push_back(build_text(spec, tables, rng, disc.id, u, disc.style_label));
    }
    for (int u = 0; u < m; ++u) {
      const UtteranceText& text = texts[u];
      double delta = offset_law ? tables.beta * texts[(u + m - 1) % m].cue_sign : 0.0;
      Utterance flagged = assign_dialogue_flags(text.utt, QuoteConfig{}).utterance;

      uint64_t gid = static_cast<uint64_t>(d) * m + u;
      Rng frame_rng(Rng::derive(spec.seed, "frames", gid));
      Acoustics ac = build_acoustics(tables, flagged, frame_rng);
      std::vector<std::array<double, 3>> lpe =
          law_lpe_rows(tables, spec.target_law, flagged, delta);

      write_with(root / "frames" / (flagged.id + ".frames"),
                 [&](std::ostream& o) { write_frames(ac.frames, o); });
      write_with(root / "align" / (flagged.id + ".align"),
                 [&](std::ostream& o) { write_alignment(ac.align, o); });
      write_with(root / "lpe" / (flagged.id + ".lpe"),
                 [&](std::ostream& o) { write_lpe_file(flagged.id, lpe, o); });
      disc.utterances.push_back(flagged);
    }
    discourses.push_back(std::move(disc));
  }
  save_manifest(discourses, (root / "manifest.jsonl").string());
  write_file((root / "law.json").string(), law_json(spec, tables, gap).dump(2) + "\n");

  GenerateResult res;
  res.num_discourses = spec.num_discourses;
  res.num_utterances = spec.num_discourses * m;
  res.offset_mse_gap = gap;
  return res;
}

double mean_baseline_mse(const std::vector<PhonemeTargets>& targets) {
  // Accumulates shifted by the first live row so a constant corpus comes
  // out exactly zero.
  std::array<double, 3> ref{};
  std::array<double, 3> sum{};
  long long n = 0;
  for (const PhonemeTargets& t : targets) {
    std::vector<std::uint8_t> mask = lpe_row_mask(t);
    for (size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      if (n == 0) ref = t.lpe[i];
      for (int c = 0; c < 3; ++c) sum[c] += t.lpe[i][c] - ref[c];
      ++n;
    }
  }
  if (n == 0) throw ValidationError("mean baseline: corpus has no live LPE rows");
  std::array<double, 3> mean;
  for (int c = 0; c < 3; ++c) mean[c] = ref[c] + sum[c] / static_cast<double>(n);
  double sq = 0.0;
  for (const PhonemeTargets& t : targets) {
    std::vector<std::uint8_t> mask = lpe_row_mask(t);
    for (size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      for (int c = 0; c < 3; ++c) {
        double dev = t.lpe[i][c] - mean[c];
        sq += dev * dev;
      }
    }
  }
  return sq / (3.0 * static_cast<double>(n));
}

}  // namespace proso
