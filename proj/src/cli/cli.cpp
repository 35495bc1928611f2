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

#include "proso/cli/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "proso/core/error.hpp"
#include "proso/core/text.hpp"
#include "proso/corpus/corpus.hpp"

namespace proso {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kStylesHeader = "utterance_id,discourse_id,utterance_style,discourse_style";

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Inverse of the serialization convention: a separator row with any nonzero
// value was a silent pause.
void restore_silence_flags(Utterance& utt, const PhonemeTargets& targets) {
  if (static_cast<size_t>(phoneme_count(utt)) != targets.pitch.size())
    throw ValidationError(cat(utt.id, ": feature rows ", targets.pitch.size(),
                              " do not match N=", phoneme_count(utt)));
  size_t i = 0;
  for (WordToken& w : utt.words) {
    for (PhonemeToken& p : w.phonemes) {
      if (p.is_separator) {
        bool zero = targets.pitch[i] == 0.0 && targets.energy[i] == 0.0 &&
                    targets.lpe[i][0] == 0.0 && targets.lpe[i][1] == 0.0 &&
                    targets.lpe[i][2] == 0.0;
        p.is_silent = !zero;
      }
      ++i;
    }
  }
}

std::vector<std::string> list_feature_ids(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ValidationError(cat("not a directory: ", dir));
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".feat")
      ids.push_back(entry.path().stem().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const std::string& id : ids) {
    if (!out.empty()) out += " ";
    out += id;
  }
  return out;
}

std::map<std::string, StyleRow> styles_by_id(const std::string& dir) {
  fs::path path = fs::path(dir) / "styles.csv";
  if (!fs::exists(path)) throw ValidationError(cat("styles.csv missing in ", dir));
  std::map<std::string, StyleRow> by_id;
  for (const StyleRow& row : parse_styles_csv(read_file(path.string())))
    by_id[row.utterance_id] = row;
  return by_id;
}

}  // namespace

int argmax_lowest(const std::vector<double>& scores) {
  if (scores.empty()) throw ValidationError("argmax of empty score vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

std::string styles_csv(const std::vector<StyleRow>& rows) {
  std::string out = cat(kStylesHeader, "\n");
  for (const StyleRow& r : rows)
    out += cat(r.utterance_id, ",", r.discourse_id, ",", r.utterance_style, ",",
               r.discourse_style, "\n");
  return out;
}

std::vector<StyleRow> parse_styles_csv(const std::string& text) {
  std::vector<std::string> lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != kStylesHeader)
    throw ParseError("styles csv: bad or missing header");
  std::vector<StyleRow> rows;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    std::vector<std::string> parts = split(lines[i], ',');
    if (parts.size() != 4) throw ParseError(cat("styles csv line ", i + 1, ": want 4 fields"));
    StyleRow row;
    row.utterance_id = parts[0];
    row.discourse_id = parts[1];
    row.utterance_style = static_cast<int>(parse_int(parts[2], "utterance_style"));
    row.discourse_style = static_cast<int>(parse_int(parts[3], "discourse_style"));
    rows.push_back(std::move(row));
  }
  return rows;
}

PrepareReport prepare_corpus(const std::string& manifest_path, const std::string& frames_dir,
                             const std::string& align_dir, const std::string& lpe_dir,
                             const std::string& out_dir) {
  std::vector<Discourse> discourses = load_manifest(manifest_path);
  fs::create_directories(out_dir);
  PrepareReport report;
  std::vector<StyleRow> styles;
  for (Discourse& disc : discourses) {
    for (Utterance& utt : disc.utterances) {
      try {
        FrameTrack frames = load_frames((fs::path(frames_dir) / (utt.id + ".frames")).string());
        AlignmentTrack align = load_alignment((fs::path(align_dir) / (utt.id + ".align")).string());
        PhonemeTargets targets = compute_acoustic_targets(utt, frames, align);
        fs::path lpe_path = fs::path(lpe_dir) / (utt.id + ".lpe");
        std::ifstream lpe(lpe_path.string(), std::ios::binary);
        if (!lpe) throw Error(cat("cannot open lpe file: ", lpe_path.string()));
        targets = attach_lpe_targets(std::move(targets), utt, lpe);
        validate_targets(utt, targets);
        save_feature_file(targets, (fs::path(out_dir) / (utt.id + ".feat")).string());
        styles.push_back({utt.id, disc.id, utt.style_label, disc.style_label});
        ++report.n_prepared;
      } catch (const Error& e) {
        report.rejected.emplace_back(utt.id, e.what());
      }
    }
  }
  write_file((fs::path(out_dir) / "styles.csv").string(), styles_csv(styles));

  std::string report_text =
      cat("prepared ", report.n_prepared, " utterances, rejected ", report.rejected.size(), "\n");
  for (const auto& [id, reason] : report.rejected)
    report_text += cat("rejected ", id, ": ", reason, "\n");
  write_file((fs::path(out_dir) / "prepare_report.txt").string(), report_text);

  fs::path manifest_copy = fs::path(out_dir) / "manifest.jsonl";
  if (report.rejected.empty()) {
    write_file(manifest_copy.string(), read_file(manifest_path));
  } else {
    fs::remove(manifest_copy);
  }
  return report;
}

TrainData load_train_data(const std::string& corpus_dir) {
  TrainData data;
  data.discourses = load_manifest((fs::path(corpus_dir) / "manifest.jsonl").string());
  for (Discourse& disc : data.discourses) {
    for (Utterance& utt : disc.utterances) {
      PhonemeTargets targets =
          load_feature_file((fs::path(corpus_dir) / (utt.id + ".feat")).string());
      restore_silence_flags(utt, targets);
      data.targets[utt.id] = std::move(targets);
    }
  }
  return data;
}

Predictor::Predictor(Checkpoint ckpt)
    : ckpt_(std::move(ckpt)), vocab_(vocab_from(ckpt_)), umpm_(ckpt_.umpm, vocab_) {
  umpm_.set_pe_norm(ckpt_.pe_norm);
  umpm_.register_params(store_);
  if (ckpt_.stage == 2) {
    dmpm_.emplace(ckpt_.dmpm);
    dmpm_->register_params(store_);
  }
  store_.initialize(0);
  restore_params(ckpt_, store_);
  store_.freeze_all();
}

DiscoursePredictions Predictor::predict(const Discourse& discourse, int speaker_override) {
  Discourse disc = discourse;
  for (Utterance& utt : disc.utterances) {
    int speaker = speaker_override >= 0 ? speaker_override : utt.speaker_id;
    if (speaker < 0 || speaker >= ckpt_.umpm.n_speakers)
      throw ValidationError(cat("unknown speaker id ", speaker, "; checkpoint knows speakers 0..",
                                ckpt_.umpm.n_speakers - 1));
    utt.speaker_id = speaker;
  }

  DiscoursePredictions out;
  std::vector<UmpmOutput> stage1_outs;
  if (ckpt_.stage == 1) {
    std::vector<double> summed(ckpt_.umpm.n_styles, 0.0);
    for (const Utterance& utt : disc.utterances) {
      UmpmOutput o = umpm_.infer_values(store_, utt, utt.speaker_id);
      for (int s = 0; s < ckpt_.umpm.n_styles; ++s) summed[s] += o.style_logits[s];
      stage1_outs.push_back(std::move(o));
    }
    out.discourse_style = argmax_lowest(summed);
  } else {
    DiscourseBatch batch = make_discourse_batch(umpm_, store_, disc, nullptr, &stage1_outs);
    Tape tape;
    ParamNodes params(tape, store_);
    DmpmModel::Nodes nodes = dmpm_->forward(tape, params, batch);
    const Matrix& lpe_final = tape.value(nodes.lpe_final);
    for (size_t u = 0; u < disc.utterances.size(); ++u) {
      std::vector<std::array<double, 3>>& rows = stage1_outs[u].lpe_export;
      for (size_t i = 0; i < rows.size(); ++i)
        for (int c = 0; c < 3; ++c)
          rows[i][c] = clamp01(lpe_final.at(static_cast<int>(u) * nodes.n_max +
                                            static_cast<int>(i), c));
    }
    const Matrix& logits = tape.value(nodes.style_logits);
    std::vector<double> row(logits.data.begin(), logits.data.end());
    out.discourse_style = argmax_lowest(row);
  }

  for (size_t u = 0; u < disc.utterances.size(); ++u) {
    const UmpmOutput& o = stage1_outs[u];
    PhonemeTargets feat;
    feat.utterance_id = disc.utterances[u].id;
    feat.pitch = o.pitch_hat;
    feat.energy = o.energy_hat;
    feat.lpe = o.lpe_export;
    out.features.push_back(std::move(feat));
    out.utterance_styles.push_back(argmax_lowest(o.style_logits));
  }
  return out;
}

int run_inference(const Checkpoint& ckpt, const std::string& manifest_path,
                  const std::string& out_dir, int speaker_override) {
  std::vector<Discourse> discourses = load_manifest(manifest_path);
  fs::create_directories(out_dir);
  Predictor predictor(ckpt);
  std::vector<StyleRow> styles;
  int n = 0;
  for (const Discourse& disc : discourses) {
    DiscoursePredictions pred = predictor.predict(disc, speaker_override);
    for (size_t u = 0; u < disc.utterances.size(); ++u) {
      save_feature_file(pred.features[u],
                        (fs::path(out_dir) / (disc.utterances[u].id + ".feat")).string());
      styles.push_back(
          {disc.utterances[u].id, disc.id, pred.utterance_styles[u], pred.discourse_style});
      ++n;
    }
  }
  write_file((fs::path(out_dir) / "styles.csv").string(), styles_csv(styles));
  return n;
}

EvalReport evaluate_dirs(const std::string& predictions_dir, const std::string& targets_dir) {
  std::vector<std::string> pred_ids = list_feature_ids(predictions_dir);
  std::vector<std::string> target_ids = list_feature_ids(targets_dir);
  if (pred_ids != target_ids) {
    std::vector<std::string> missing, extra;
    std::set_difference(target_ids.begin(), target_ids.end(), pred_ids.begin(), pred_ids.end(),
                        std::back_inserter(missing));
    std::set_difference(pred_ids.begin(), pred_ids.end(), target_ids.begin(), target_ids.end(),
                        std::back_inserter(extra));
    throw ValidationError(cat("utterance sets differ; missing from predictions: [",
                              join_ids(missing), "]; extra in predictions: [", join_ids(extra),
                              "]"));
  }
  if (pred_ids.empty()) throw ValidationError("no feature files to evaluate");

  std::map<std::string, StyleRow> pred_styles = styles_by_id(predictions_dir);
  std::map<std::string, StyleRow> target_styles = styles_by_id(targets_dir);

  EvalReport report;
  double pitch_sq = 0.0, energy_sq = 0.0, lpe_sq = 0.0;
  long long n_rows = 0, n_lpe = 0;
  int utt_correct = 0;
  std::map<std::string, std::pair<int, int>> discourse_votes;  // id -> (pred, truth)
  for (const std::string& id : pred_ids) {
    PhonemeTargets pred =
        load_feature_file((fs::path(predictions_dir) / (id + ".feat")).string());
    PhonemeTargets target = load_feature_file((fs::path(targets_dir) / (id + ".feat")).string());
    if (pred.pitch.size() != target.pitch.size())
      throw ValidationError(cat(id, ": row counts differ (", pred.pitch.size(), " vs ",
                                target.pitch.size(), ")"));
    std::vector<std::uint8_t> mask = lpe_row_mask(target);

    UtteranceEval ue;
    ue.utterance_id = id;
    ue.n_phonemes = static_cast<int>(target.pitch.size());
    double u_pitch = 0.0, u_energy = 0.0, u_lpe = 0.0;
    for (size_t i = 0; i < target.pitch.size(); ++i) {
      double dp = pred.pitch[i] - target.pitch[i];
      double de = pred.energy[i] - target.energy[i];
      u_pitch += dp * dp;
      u_energy += de * de;
      if (!mask[i]) continue;
      ++ue.n_lpe_rows;
      for (int c = 0; c < 3; ++c) {
        double dl = pred.lpe[i][c] - target.lpe[i][c];
        u_lpe += dl * dl;
      }
    }
    pitch_sq += u_pitch;
    energy_sq += u_energy;
    lpe_sq += u_lpe;
    n_rows += ue.n_phonemes;
    n_lpe += ue.n_lpe_rows;
    ue.pitch_mse = ue.n_phonemes > 0 ? u_pitch / ue.n_phonemes : 0.0;
    ue.energy_mse = ue.n_phonemes > 0 ? u_energy / ue.n_phonemes : 0.0;
    ue.lpe_mse = ue.n_lpe_rows > 0 ? u_lpe / (3.0 * ue.n_lpe_rows) : 0.0;

    auto pred_it = pred_styles.find(id);
    auto target_it = target_styles.find(id);
    if (pred_it == pred_styles.end() || target_it == target_styles.end())
      throw ValidationError(cat("styles.csv has no row for utterance '", id, "'"));
    ue.style_correct = pred_it->second.utterance_style == target_it->second.utterance_style;
    utt_correct += ue.style_correct ? 1 : 0;
    auto [it, inserted] = discourse_votes.try_emplace(
        target_it->second.discourse_id, pred_it->second.discourse_style,
        target_it->second.discourse_style);
    (void)it;
    (void)inserted;
    report.per_utterance.push_back(std::move(ue));
  }

  report.pitch_mse = n_rows > 0 ? pitch_sq / static_cast<double>(n_rows) : 0.0;
  report.energy_mse = n_rows > 0 ? energy_sq / static_cast<double>(n_rows) : 0.0;
  report.lpe_mse = n_lpe > 0 ? lpe_sq / (3.0 * static_cast<double>(n_lpe)) : 0.0;
  report.utterance_style_accuracy =
      static_cast<double>(utt_correct) / static_cast<double>(pred_ids.size());
  int disc_correct = 0;
  for (const auto& [disc_id, vote] : discourse_votes)
    disc_correct += vote.first == vote.second ? 1 : 0;
  report.discourse_style_accuracy =
      static_cast<double>(disc_correct) / static_cast<double>(discourse_votes.size());
  return report;
}

void write_eval_report(const EvalReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);
  json j;
  j["lpe_mse"] = report.lpe_mse;
  j["pitch_mse"] = report.pitch_mse;
  j["energy_mse"] = report.energy_mse;
  j["utterance_style_accuracy"] = report.utterance_style_accuracy;
  j["discourse_style_accuracy"] = report.discourse_style_accuracy;
  j["n_utterances"] = report.per_utterance.size();
  json arr = json::array();
  for (const UtteranceEval& ue : report.per_utterance)
    arr.push_back({{"utterance_id", ue.utterance_id},
                   {"n_phonemes", ue.n_phonemes},
                   {"n_lpe_rows", ue.n_lpe_rows},
                   {"pitch_mse", ue.pitch_mse},
                   {"energy_mse", ue.energy_mse},
                   {"lpe_mse", ue.lpe_mse},
                   {"style_correct", ue.style_correct}});
  j["per_utterance"] = arr;
  write_file((fs::path(out_dir) / "eval_report.json").string(), j.dump(2) + "\n");

  std::string csv = "utterance_id,n_phonemes,n_lpe_rows,pitch_mse,energy_mse,lpe_mse,style_correct\n";
  for (const UtteranceEval& ue : report.per_utterance)
    csv += cat(ue.utterance_id, ",", ue.n_phonemes, ",", ue.n_lpe_rows, ",",
               fmt_double(ue.pitch_mse), ",", fmt_double(ue.energy_mse), ",",
               fmt_double(ue.lpe_mse), ",", ue.style_correct ? 1 : 0, "\n");
  write_file((fs::path(out_dir) / "eval_report.csv").string(), csv);
}

std::string pitch_contour_csv(const PhonemeTargets& targets, const Utterance& utt) {
  if (static_cast<size_t>(phoneme_count(utt)) != targets.pitch.size())
    throw ValidationError(cat(targets.utterance_id, ": feature rows ", targets.pitch.size(),
                              " do not match N=", phoneme_count(utt)));
  std::vector<PhonemeToken> flat = flat_phonemes(utt);
  std::string csv = "phoneme_index,symbol,pitch,energy,is_separator\n";
  for (size_t i = 0; i < flat.size(); ++i)
    csv += cat(i, ",", flat[i].symbol, ",", fmt_double(targets.pitch[i]), ",",
               fmt_double(targets.energy[i]), ",", flat[i].is_separator ? "true" : "false", "\n");
  return csv;
}

}  // namespace proso
