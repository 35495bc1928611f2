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
#include <sstream>

#include "proso/core/error.hpp"
#include "proso/core/text.hpp"
#include "proso/features/features.hpp"

namespace proso {

namespace {

std::vector<std::string> body_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string> parse_header(const std::string& line, const char* magic,
                                      size_t extra_fields) {
  std::vector<std::string> parts = split_ws(line);
  if (parts.size() != 2 + extra_fields || parts[0] != magic || parts[1] != "v1")
    throw ParseError(cat("bad header, expected '", magic, " v1 ...': '", line, "'"));
  return parts;
}

}  // namespace

FrameTrack read_frames(std::istream& in) {
  std::vector<std::string> lines = body_lines(in);
  if (lines.empty()) throw ParseError("empty frame track file");
  std::vector<std::string> head = parse_header(lines[0], "PROSO-FRAMES", 2);
  FrameTrack track;
  track.utterance_id = head[2];
  track.frame_period_ms = parse_double(head[3], "frame_period_ms");
  for (size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> parts = split_ws(lines[i]);
    if (parts.size() != 2)
      throw ParseError(cat(track.utterance_id, ": frame line ", i, ": want 2 fields, got ",
                           parts.size()));
    track.f0_hz.push_back(parse_double(parts[0], "f0_hz"));
    track.energy.push_back(parse_double(parts[1], "energy"));
  }
  validate_frame_track(track);
  return track;
}

void write_frames(const FrameTrack& track, std::ostream& out) {
  out << "PROSO-FRAMES v1 " << track.utterance_id << " " << fmt_double(track.frame_period_ms)
      << "\n";
  for (size_t i = 0; i < track.f0_hz.size(); ++i)
    out << fmt_double(track.f0_hz[i]) << " " << fmt_double(track.energy[i]) << "\n";
}

AlignmentTrack read_alignment(std::istream& in) {
  std::vector<std::string> lines = body_lines(in);
  if (lines.empty()) throw ParseError("empty alignment file");
  std::vector<std::string> head = parse_header(lines[0], "PROSO-ALIGN", 1);
  AlignmentTrack align;
  align.utterance_id = head[2];
  for (size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> parts = split_ws(lines[i]);
    if (parts.size() != 3)
      throw ParseError(cat(align.utterance_id, ": interval line ", i, ": want 3 fields, got ",
                           parts.size()));
    AlignmentInterval iv;
    iv.label = parts[0];
    iv.start_frame = static_cast<int>(parse_int(parts[1], "start_frame"));
    iv.end_frame = static_cast<int>(parse_int(parts[2], "end_frame"));
    align.intervals.push_back(std::move(iv));
  }
  validate_alignment(align);
  return align;
}

void write_alignment(const AlignmentTrack& align, std::ostream& out) {
  out << "PROSO-ALIGN v1 " << align.utterance_id << "\n";
  for (const AlignmentInterval& iv : align.intervals)
    out << iv.label << " " << iv.start_frame << " " << iv.end_frame << "\n";
}

PhonemeTargets read_feature_file(std::istream& in) {
  std::vector<std::string> lines = body_lines(in);
  if (lines.empty()) throw ParseError("empty feature file");
  std::vector<std::string> head = parse_header(lines[0], "PROSO-FEAT", 2);
  PhonemeTargets targets;
  targets.utterance_id = head[2];
  size_t n = static_cast<size_t>(parse_int(head[3], "phoneme count"));
  if (lines.size() - 1 != n)
    throw ParseError(cat(targets.utterance_id, ": header says ", n, " phonemes, file has ",
                         lines.size() - 1));
  for (size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> parts = split_ws(lines[i]);
    if (parts.size() != 5)
      throw ParseError(cat(targets.utterance_id, ": feature line ", i,
                           ": want 5 fields, got ", parts.size()));
    targets.pitch.push_back(parse_double(parts[0], "pitch"));
    targets.energy.push_back(parse_double(parts[1], "energy"));
    targets.lpe.push_back({parse_double(parts[2], "lpe1"), parse_double(parts[3], "lpe2"),
                           parse_double(parts[4], "lpe3")});
  }
  return targets;
}

void write_feature_file(const PhonemeTargets& targets, std::ostream& out) {
  out << "PROSO-FEAT v1 " << targets.utterance_id << " " << targets.pitch.size() << "\n";
  for (size_t i = 0; i < targets.pitch.size(); ++i) {
    out << fmt_double(targets.pitch[i]) << " " << fmt_double(targets.energy[i]);
    for (double v : targets.lpe[i]) out << " " << fmt_double(v);
    out << "\n";
  }
}

void write_lpe_file(const std::string& utterance_id,
                    const std::vector<std::array<double, 3>>& rows, std::ostream& out) {
  out << "PROSO-LPE v1 " << utterance_id << " " << rows.size() << "\n";
  for (const auto& row : rows)
    out << fmt_double(row[0]) << " " << fmt_double(row[1]) << " " << fmt_double(row[2]) << "\n";
}

PhonemeTargets attach_lpe_targets(PhonemeTargets targets, const Utterance& utt,
                                  std::istream& lpe_stream) {
  std::vector<std::string> lines = body_lines(lpe_stream);
  if (lines.empty()) throw ParseError(cat(targets.utterance_id, ": empty lpe file"));
  std::vector<std::string> head = parse_header(lines[0], "PROSO-LPE", 2);
  if (head[2] != targets.utterance_id)
    throw ParseError(cat(targets.utterance_id, ": lpe file is for '", head[2], "'"));
  size_t n = targets.pitch.size();
  if (static_cast<size_t>(parse_int(head[3], "row count")) != n || lines.size() - 1 != n)
    throw ParseError(cat(targets.utterance_id, ": lpe rows ", lines.size() - 1,
                         " do not match N=", n));

  std::vector<PhonemeToken> flat = flat_phonemes(utt);
  if (flat.size() != n)
    throw ValidationError(cat(targets.utterance_id, ": utterance N=", flat.size(),
                              " does not match targets N=", n));
  for (size_t i = 0; i < n; ++i) {
    std::vector<std::string> parts = split_ws(lines[i + 1]);
    if (parts.size() != 3)
      throw ParseError(cat(targets.utterance_id, ": lpe line ", i + 1, ": want 3 fields"));
    std::array<double, 3> row;
    for (int k = 0; k < 3; ++k) {
      row[k] = parse_double(parts[k], "lpe component");
      if (!(row[k] >= 0.0 && row[k] <= 1.0))
        throw ValidationError(cat(targets.utterance_id, ": lpe component ", row[k],
                                  " at row ", i, " outside [0,1]"));
    }
    if (flat[i].is_separator && !flat[i].is_silent) row = {0.0, 0.0, 0.0};
    targets.lpe[i] = row;
  }
  return targets;
}

PhonemeTargets load_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(cat("cannot open feature file: ", path));
  return read_feature_file(in);
}

void save_feature_file(const PhonemeTargets& targets, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(cat("cannot open feature file for writing: ", path));
  write_feature_file(targets, out);
  out.flush();
  if (!out) throw Error(cat("feature file write failed: ", path));
}

FrameTrack load_frames(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(cat("cannot open frame track: ", path));
  return read_frames(in);
}

AlignmentTrack load_alignment(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(cat("cannot open alignment: ", path));
  return read_alignment(in);
}

}  // namespace proso
