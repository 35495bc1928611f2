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

#include "proso/features/features.hpp"

#include <cmath>

#include "proso/core/error.hpp"

namespace proso {

void validate_frame_track(const FrameTrack& track) {
  if (!(track.frame_period_ms > 0.0))
    throw ValidationError(cat(track.utterance_id, ": frame_period_ms must be > 0"));
  if (track.f0_hz.size() != track.energy.size())
    throw ValidationError(cat(track.utterance_id, ": f0 and energy lengths differ (",
                              track.f0_hz.size(), " vs ", track.energy.size(), ")"));
  for (size_t i = 0; i < track.f0_hz.size(); ++i) {
    if (track.f0_hz[i] < 0.0 || track.energy[i] < 0.0)
      throw ValidationError(cat(track.utterance_id, ": negative value at frame ", i));
  }
}

void validate_alignment(const AlignmentTrack& align) {
  int prev_end = 0;
  for (size_t i = 0; i < align.intervals.size(); ++i) {
    const AlignmentInterval& iv = align.intervals[i];
    if (iv.label.empty())
      throw ValidationError(cat(align.utterance_id, ": interval ", i, ": empty label"));
    if (iv.start_frame < 0 || iv.start_frame >= iv.end_frame)
      throw ValidationError(cat(align.utterance_id, ": interval ", i, ": bad range [",
                                iv.start_frame, ",", iv.end_frame, ")"));
    if (iv.start_frame < prev_end)
      throw ValidationError(cat(align.utterance_id, ": interval ", i,
                                " overlaps or reorders the previous one"));
    prev_end = iv.end_frame;
  }
}

MatchedIntervals match_alignment(const Utterance& utt, const AlignmentTrack& align) {
  validate_alignment(align);
  const auto& ivs = align.intervals;
  size_t k = 0;
  auto is_silence = [&](size_t idx) { return idx < ivs.size() && ivs[idx].label == kSilenceLabel; };
  auto reject_double_silence = [&](size_t idx) {
    if (is_silence(idx + 1))
      throw ValidationError(cat(utt.id, ": consecutive silence intervals at ", idx));
  };

  MatchedIntervals out;
  int phoneme_index = 0;
  for (const WordToken& w : utt.words) {
    for (const PhonemeToken& p : w.phonemes) {
      if (p.is_separator) {
        if (is_silence(k)) {
          reject_double_silence(k);
          out.start.push_back(ivs[k].start_frame);
          out.end.push_back(ivs[k].end_frame);
          out.has_interval.push_back(1);
          ++k;
        } else {
          out.start.push_back(-1);
          out.end.push_back(-1);
          out.has_interval.push_back(0);
        }
      } else {
        if (is_silence(k)) {
          reject_double_silence(k);
          ++k;
        }
        if (k >= ivs.size())
          throw ValidationError(cat(utt.id, ": phoneme ", phoneme_index, " ('", p.symbol,
                                    "') has no matching interval"));
        if (ivs[k].label != p.symbol)
          throw ValidationError(cat(utt.id, ": phoneme ", phoneme_index, ": expected '",
                                    p.symbol, "', alignment says '", ivs[k].label, "'"));
        out.start.push_back(ivs[k].start_frame);
        out.end.push_back(ivs[k].end_frame);
        out.has_interval.push_back(1);
        ++k;
      }
      ++phoneme_index;
    }
  }
  if (is_silence(k)) {
    reject_double_silence(k);
    ++k;
  }
  if (k != ivs.size())
    throw ValidationError(cat(utt.id, ": ", ivs.size() - k, " unconsumed alignment intervals"));
  return out;
}

namespace {

std::pair<double, double> interval_means(const FrameTrack& track, int start, int end,
                                         const std::string& utt_id) {
  if (end > static_cast<int>(track.f0_hz.size()))
    throw ValidationError(cat(utt_id, ": alignment needs frame ", end, " but track has ",
                              track.f0_hz.size()));
  double log_sum = 0.0;
  int voiced = 0;
  double energy_sum = 0.0;
  for (int f = start; f < end; ++f) {
    if (track.f0_hz[f] > 0.0) {
      log_sum += std::log(track.f0_hz[f]);
      ++voiced;
    }
    energy_sum += track.energy[f];
  }
  double pitch = voiced > 0 ? log_sum / voiced : 0.0;
  double energy = energy_sum / (end - start);
  return {pitch, energy};
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> aggregate_pitch_energy(
    const Utterance& utt, const FrameTrack& track, const AlignmentTrack& align) {
  validate_frame_track(track);
  MatchedIntervals match = match_alignment(utt, align);
  std::vector<double> pitch(match.start.size(), 0.0);
  std::vector<double> energy(match.start.size(), 0.0);
  for (size_t i = 0; i < match.start.size(); ++i) {
    if (!match.has_interval[i]) continue;
    auto [p, e] = interval_means(track, match.start[i], match.end[i], utt.id);
    pitch[i] = p;
    energy[i] = e;
  }
  return {std::move(pitch), std::move(energy)};
}

std::vector<SeparatorFeature> apply_separator_rule(Utterance& utt,
                                                   const AlignmentTrack& align,
                                                   const FrameTrack& track) {
  validate_frame_track(track);
  MatchedIntervals match = match_alignment(utt, align);
  std::vector<SeparatorFeature> out;
  size_t flat = 0;
  for (size_t wi = 0; wi < utt.words.size(); ++wi) {
    WordToken& w = utt.words[wi];
    for (PhonemeToken& p : w.phonemes) {
      if (p.is_separator) {
        SeparatorFeature feat;
        feat.word_index = static_cast<int>(wi);
        feat.is_silent = match.has_interval[flat] != 0;
        if (feat.is_silent) {
          auto [pm, em] = interval_means(track, match.start[flat], match.end[flat], utt.id);
          feat.pitch = pm;
          feat.energy = em;
        }
        p.is_silent = feat.is_silent;
        out.push_back(feat);
      }
      ++flat;
    }
  }
  return out;
}

PhonemeTargets compute_acoustic_targets(Utterance& utt, const FrameTrack& track,
                                        const AlignmentTrack& align) {
  apply_separator_rule(utt, align, track);
  auto [pitch, energy] = aggregate_pitch_energy(utt, track, align);
  PhonemeTargets targets;
  targets.utterance_id = utt.id;
  targets.pitch = std::move(pitch);
  targets.energy = std::move(energy);
  targets.lpe.assign(targets.pitch.size(), {0.0, 0.0, 0.0});
  return targets;
}

void validate_targets(const Utterance& utt, const PhonemeTargets& targets) {
  size_t n = static_cast<size_t>(phoneme_count(utt));
  if (targets.pitch.size() != n || targets.energy.size() != n || targets.lpe.size() != n)
    throw ValidationError(cat(utt.id, ": target lengths (", targets.pitch.size(), ",",
                              targets.energy.size(), ",", targets.lpe.size(),
                              ") do not equal N=", n));
  std::vector<PhonemeToken> flat = flat_phonemes(utt);
  for (size_t i = 0; i < n; ++i) {
    for (double v : targets.lpe[i]) {
      if (!(v >= 0.0 && v <= 1.0))
        throw ValidationError(cat(utt.id, ": lpe component ", v, " at phoneme ", i,
                                  " outside [0,1]"));
    }
    if (flat[i].is_separator && !flat[i].is_silent) {
      bool zero = targets.pitch[i] == 0.0 && targets.energy[i] == 0.0 &&
                  targets.lpe[i][0] == 0.0 && targets.lpe[i][1] == 0.0 &&
                  targets.lpe[i][2] == 0.0;
      if (!zero)
        throw ValidationError(cat(utt.id, ": non-silent separator at phoneme ", i,
                                  " has nonzero features"));
    }
  }
}

}  // namespace proso
