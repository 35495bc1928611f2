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

#ifndef PROSO_CLI_CLI_HPP_
#define PROSO_CLI_CLI_HPP_

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "proso/model/dmpm.hpp"
#include "proso/train/checkpoint.hpp"
#include "proso/train/train.hpp"

namespace proso {

// Highest-scoring index; ties break toward the lowest index.
int argmax_lowest(const std::vector<double>& scores);

// Per-utterance style rows carried next to the feature files, for both
// ground truth (prepare) and predictions (infer).
struct StyleRow {
  std::string utterance_id;
  std::string discourse_id;
  int utterance_style = 0;
  int discourse_style = 0;
};

std::string styles_csv(const std::vector<StyleRow>& rows);
std::vector<StyleRow> parse_styles_csv(const std::string& text);

// Feature assembly over a whole corpus: frames + alignment + LPE per
// utterance into PROSO-FEAT files under out_dir, plus styles.csv, a
// prepare_report.txt and (when nothing was rejected) a manifest copy.
struct PrepareReport {
  int n_prepared = 0;
  std::vector<std::pair<std::string, std::string>> rejected;  // id, reason
};

PrepareReport prepare_corpus(const std::string& manifest_path, const std::string& frames_dir,
                             const std::string& align_dir, const std::string& lpe_dir,
                             const std::string& out_dir);

// Reads a prepared corpus directory (manifest.jsonl plus <id>.feat files).
TrainData load_train_data(const std::string& corpus_dir);

// Checkpoint-backed inference. Stage-1 checkpoints run U-MPM per utterance;
// stage-2 checkpoints additionally run the D-MPM adjustment over each
// discourse, keeping stage-1 pitch/energy.
struct DiscoursePredictions {
  std::vector<PhonemeTargets> features;
  std::vector<int> utterance_styles;
  int discourse_style = 0;
};

class Predictor {
 public:
  explicit Predictor(Checkpoint ckpt);

  int stage() const { return ckpt_.stage; }
  int n_speakers() const { return ckpt_.umpm.n_speakers; }

  // speaker_override < 0 keeps each utterance's own speaker id.
  DiscoursePredictions predict(const Discourse& discourse, int speaker_override = -1);

 private:
  Checkpoint ckpt_;
  Vocabulary vocab_;
  UmpmModel umpm_;
  std::optional<DmpmModel> dmpm_;
  ParamStore store_;
};

// Runs a Predictor over a manifest and writes <id>.feat plus styles.csv.
int run_inference(const Checkpoint& ckpt, const std::string& manifest_path,
                  const std::string& out_dir, int speaker_override);

// LPE/pitch/energy MSE and style accuracies of a prediction directory
// against a target directory with matching utterance sets. Masks follow the
// training convention: LPE over live rows of the target, pitch/energy over
// all rows.
struct UtteranceEval {
  std::string utterance_id;
  int n_phonemes = 0;
  int n_lpe_rows = 0;
  double pitch_mse = 0.0;
  double energy_mse = 0.0;
  double lpe_mse = 0.0;
  bool style_correct = false;
};

struct EvalReport {
  double lpe_mse = 0.0;
  double pitch_mse = 0.0;
  double energy_mse = 0.0;
  double utterance_style_accuracy = 0.0;
  double discourse_style_accuracy = 0.0;
  std::vector<UtteranceEval> per_utterance;
};

EvalReport evaluate_dirs(const std::string& predictions_dir, const std::string& targets_dir);

// Writes eval_report.json and eval_report.csv under out_dir.
void write_eval_report(const EvalReport& report, const std::string& out_dir);

// Per-phoneme contour table for external plotting:
// phoneme_index,symbol,pitch,energy,is_separator.
std::string pitch_contour_csv(const PhonemeTargets& targets, const Utterance& utt);

}  // namespace proso

#endif  // PROSO_CLI_CLI_HPP_
