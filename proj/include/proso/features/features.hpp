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

#ifndef PROSO_FEATURES_FEATURES_HPP_
#define PROSO_FEATURES_FEATURES_HPP_

#include <array>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "proso/corpus/types.hpp"

namespace proso {

inline constexpr const char* kSilenceLabel = "silence";

struct FrameTrack {
  std::string utterance_id;
  double frame_period_ms = 10.0;
  std::vector<double> f0_hz;   // 0 = unvoiced
  std::vector<double> energy;
};

struct AlignmentInterval {
  std::string label;  // phoneme symbol or "silence"
  int start_frame = 0;
  int end_frame = 0;
};

struct AlignmentTrack {
  std::string utterance_id;
  std::vector<AlignmentInterval> intervals;
};

struct PhonemeTargets {
  std::string utterance_id;
  std::vector<double> pitch;                 // mean log F0, length N
  std::vector<double> energy;                // mean frame energy, length N
  std::vector<std::array<double, 3>> lpe;    // entries in [0,1], length N
};

void validate_frame_track(const FrameTrack& track);
void validate_alignment(const AlignmentTrack& align);

// Maps each pronounced phoneme of utt to its alignment interval, in order.
// Separators bind to an optional "silence" interval; a stray silence before
// a normal phoneme (a pause at a punctuation boundary) is skipped. Intervals
// are (start, end) frame pairs, or (-1, -1) for a separator with no pause.
struct MatchedIntervals {
  std::vector<int> start;            // length N
  std::vector<int> end;              // length N
  std::vector<uint8_t> has_interval; // length N
};
MatchedIntervals match_alignment(const Utterance& utt, const AlignmentTrack& align);

// Per-phoneme (pitch, energy): pitch is the mean of ln(f0) over voiced
// frames of the interval (0 when fully unvoiced), energy the mean over all
// frames. Separators without a pause get zeros.
std::pair<std::vector<double>, std::vector<double>> aggregate_pitch_energy(
    const Utterance& utt, const FrameTrack& track, const AlignmentTrack& align);

// Sets is_silent on each separator phoneme of utt and reports the separator
// features implied by the silence rule.
struct SeparatorFeature {
  int word_index = 0;
  double pitch = 0.0;
  double energy = 0.0;
  bool is_silent = false;
};
std::vector<SeparatorFeature> apply_separator_rule(Utterance& utt,
                                                   const AlignmentTrack& align,
                                                   const FrameTrack& track);

// Full acoustic target assembly: runs the matcher, fills pitch/energy, sets
// separator silence flags on utt, leaves lpe rows zeroed.
PhonemeTargets compute_acoustic_targets(Utterance& utt, const FrameTrack& track,
                                        const AlignmentTrack& align);

// Fills targets.lpe from a PROSO-LPE stream; rejects out-of-range values and
// forces non-silent separator rows to zero.
PhonemeTargets attach_lpe_targets(PhonemeTargets targets, const Utterance& utt,
                                  std::istream& lpe_stream);

// Checks the PhonemeTargets invariants against the matching utterance.
void validate_targets(const Utterance& utt, const PhonemeTargets& targets);

FrameTrack read_frames(std::istream& in);
void write_frames(const FrameTrack& track, std::ostream& out);

AlignmentTrack read_alignment(std::istream& in);
void write_alignment(const AlignmentTrack& align, std::ostream& out);

PhonemeTargets read_feature_file(std::istream& in);
void write_feature_file(const PhonemeTargets& targets, std::ostream& out);

// Raw LPE rows as produced upstream: header plus N rows of 3 reals.
void write_lpe_file(const std::string& utterance_id,
                    const std::vector<std::array<double, 3>>& rows, std::ostream& out);

PhonemeTargets load_feature_file(const std::string& path);
void save_feature_file(const PhonemeTargets& targets, const std::string& path);
FrameTrack load_frames(const std::string& path);
AlignmentTrack load_alignment(const std::string& path);

}  // namespace proso

#endif  // PROSO_FEATURES_FEATURES_HPP_
