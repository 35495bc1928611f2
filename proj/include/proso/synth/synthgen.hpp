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

#ifndef PROSO_SYNTH_SYNTHGEN_HPP_
#define PROSO_SYNTH_SYNTHGEN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "proso/features/features.hpp"

namespace proso {

// Closed-form LPE target laws. word_dependent and mixed read the word
// identity, tone and dialogue flag; phoneme_dependent and context_offset
// read the phoneme identity and tone. context_offset and mixed add a
// per-utterance offset whose sign is carried by the previous utterance's
// cue word, so it is invisible to any single-utterance predictor.
enum class TargetLaw { kWordDependent, kPhonemeDependent, kContextOffset, kMixed };

std::string target_law_name(TargetLaw law);
TargetLaw target_law_from_name(const std::string& name);

struct GeneratorSpec {
  int num_discourses = 200;
  int utterances_per_discourse = 10;
  int vocab_size = 24;  // body words, consecutive even/odd pairs are homophones
  int phoneme_alphabet_size = 12;
  int num_speakers = 2;
  int num_styles = 2;
  std::uint64_t seed = 1;
  TargetLaw target_law = TargetLaw::kWordDependent;
};

void validate_generator_spec(const GeneratorSpec& spec);

struct GenerateResult {
  int num_discourses = 0;
  int num_utterances = 0;
  // Extra LPE MSE any single-utterance predictor must pay on offset laws
  // (the offset variance); 0 for the per-utterance laws.
  double offset_mse_gap = 0.0;
};

// Writes manifest.jsonl, law.json and one frames/align/lpe file per
// utterance under out_dir. The same spec regenerates byte-identical output.
// Refuses to write into a nonempty directory.
GenerateResult generate(const GeneratorSpec& spec, const std::string& out_dir);

// MSE of predicting the per-corpus mean LPE on every live row, using the
// same row mask as the training losses. Throws when no live row exists.
double mean_baseline_mse(const std::vector<PhonemeTargets>& targets);

}  // namespace proso

#endif  // PROSO_SYNTH_SYNTHGEN_HPP_
