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

#ifndef PROSO_MODEL_UMPM_HPP_
#define PROSO_MODEL_UMPM_HPP_

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "proso/core/matrix.hpp"
#include "proso/core/tape.hpp"
#include "proso/corpus/types.hpp"
#include "proso/encoder/encoder.hpp"
#include "proso/features/features.hpp"
#include "proso/model/params.hpp"

namespace proso {

// Weights of the four utterance-level loss terms.
struct LossLambdas {
  double pitch = 0.05;
  double energy = 0.0025;
  double lpe = 1.0;
  double style = 1.0;
};

// Per-corpus pitch/energy normalization constants. Identity by default;
// training fills them only when normalization is enabled in the config.
struct PeNorm {
  double pitch_mean = 0.0;
  double pitch_std = 1.0;
  double energy_mean = 0.0;
  double energy_std = 1.0;

  bool is_identity() const {
    return pitch_mean == 0.0 && pitch_std == 1.0 && energy_mean == 0.0 && energy_std == 1.0;
  }
  double norm_pitch(double v) const {
    return is_identity() ? v : (v - pitch_mean) / pitch_std;
  }
  double norm_energy(double v) const {
    return is_identity() ? v : (v - energy_mean) / energy_std;
  }
  double denorm_pitch(double v) const {
    return is_identity() ? v : v * pitch_std + pitch_mean;
  }
  double denorm_energy(double v) const {
    return is_identity() ? v : v * energy_std + energy_mean;
  }
};

struct UmpmConfig {
  EncoderConfig encoder;
  std::vector<std::string> phoneme_alphabet;  // includes the separator symbol
  int n_speakers = 1;
  int n_styles = 2;
  int mlp_hidden = 32;
  bool ablate_word = false;  // zero out E_LR; encoder still feeds the style path
  bool ablate_phn = false;   // drop phoneme and tone embedding terms
  bool ablate_pe = false;    // drop the acoustic path; LPE input width is d
};

enum class RunMode { kTrain, kInfer };

// Node handles for one utterance's forward pass. Pitch/energy live in the
// normalized space when a non-identity PeNorm is set.
struct UmpmNodes {
  Tape::Id word_vectors = -1;      // n_tokens x d, dialogue term included
  Tape::Id utterance_vector = -1;  // 1 x r
  Tape::Id pitch_hat = -1;         // N x 1
  Tape::Id energy_hat = -1;        // N x 1
  Tape::Id lpe_hat = -1;           // N x 3
  Tape::Id style_logits = -1;      // 1 x n_styles
  int n_phonemes = 0;
  int n_tokens = 0;
};

// Value-level inference result.
struct UmpmOutput {
  std::vector<double> pitch_hat;   // de-normalized
  std::vector<double> energy_hat;  // de-normalized
  std::vector<std::array<double, 3>> lpe_raw;
  std::vector<std::array<double, 3>> lpe_export;  // clamped to [0, 1]
  std::vector<double> style_logits;
  std::vector<double> utterance_vector;  // 1 x r row
};

// Summed (not averaged) loss pieces for one utterance, for batch pooling.
struct UtteranceSse {
  Tape::Id pitch_sse = -1;
  Tape::Id energy_sse = -1;
  Tape::Id lpe_sse = -1;
  Tape::Id style_ce = -1;
  int n_valid = 0;     // rows counted by the pitch/energy terms
  int n_lpe_rows = 0;  // rows counted by the LPE term
};

// Per-term means plus the weighted total.
struct UtteranceLossNodes {
  Tape::Id pitch_mse = -1;
  Tape::Id energy_mse = -1;
  Tape::Id lpe_mse = -1;
  Tape::Id style_ce = -1;
  Tape::Id total = -1;
};

// Rows whose 5 target values are all exactly zero are non-silent separators
// (targets force them to zero); their LPE rows are masked out of losses and
// metrics.
std::vector<std::uint8_t> lpe_row_mask(const PhonemeTargets& targets);

UtteranceSse utterance_sse(Tape& tape, Tape::Id pitch_hat, Tape::Id energy_hat, Tape::Id lpe_hat,
                           Tape::Id style_logits, const Matrix& pitch_target,
                           const Matrix& energy_target, const Matrix& lpe_target, int style_label,
                           const std::vector<std::uint8_t>& mask,
                           const std::vector<std::uint8_t>& lpe_mask);

UtteranceLossNodes utterance_loss(Tape& tape, Tape::Id pitch_hat, Tape::Id energy_hat,
                                  Tape::Id lpe_hat, Tape::Id style_logits,
                                  const Matrix& pitch_target, const Matrix& energy_target,
                                  const Matrix& lpe_target, int style_label,
                                  const LossLambdas& lambdas,
                                  const std::vector<std::uint8_t>& mask,
                                  const std::vector<std::uint8_t>& lpe_mask);

// Stage-1 utterance model: word features with a dialogue term, length
// regulation to phoneme granularity, multi-scale fusion, pitch/energy
// prediction, teacher-forced LPE prediction, and style classification.
class UmpmModel {
 public:
  UmpmModel(UmpmConfig config, Vocabulary vocab);

  void register_params(ParamStore& store) const;

  const UmpmConfig& config() const { return config_; }
  const ToyEncoder& encoder() const { return encoder_; }
  const PeNorm& pe_norm() const { return pe_norm_; }
  void set_pe_norm(const PeNorm& n) { pe_norm_ = n; }

  int phoneme_id(const std::string& symbol) const;

  // Phoneme position -> encoder token index. Lexical word i contributes p_i
  // copies of its own token index, a separator one copy of the preceding
  // lexical word's index, punctuation none.
  static std::vector<int> length_regulation_indices(const Utterance& utt);

  struct WordFeats {
    Tape::Id word_vectors = -1;      // n_tokens x d
    Tape::Id utterance_vector = -1;  // 1 x r
    int n_tokens = 0;
  };
  WordFeats word_features(Tape& tape, ParamNodes& params, const Utterance& utt) const;

  Tape::Id length_regulate(Tape& tape, Tape::Id word_feats, const Utterance& utt) const;

  Tape::Id fuse_phoneme_features(Tape& tape, ParamNodes& params, Tape::Id e_lr,
                                 const Utterance& utt, int speaker_id) const;

  std::pair<Tape::Id, Tape::Id> predict_pitch_energy(Tape& tape, ParamNodes& params,
                                                     Tape::Id e_pf) const;

  // pitch/energy are N x 1 columns; ignored (and may be -1) under ablate_pe.
  Tape::Id predict_lpe(Tape& tape, ParamNodes& params, Tape::Id e_pf, Tape::Id pitch,
                       Tape::Id energy) const;

  Tape::Id classify_style(Tape& tape, ParamNodes& params, Tape::Id utterance_vector) const;

  // Train mode teacher-forces ground-truth pitch/energy into the LPE
  // predictor; infer mode feeds the model's own predictions.
  UmpmNodes forward(Tape& tape, ParamNodes& params, const Utterance& utt,
                    const PhonemeTargets* targets, RunMode mode, int speaker_id) const;

  // Builds the loss for one utterance from its forward nodes: pitch/energy
  // targets normalized by pe_norm, LPE rows of non-silent separators masked.
  UtteranceLossNodes build_loss(Tape& tape, const UmpmNodes& nodes, const PhonemeTargets& targets,
                                int style_label, const LossLambdas& lambdas) const;
  UtteranceSse build_sse(Tape& tape, const UmpmNodes& nodes, const PhonemeTargets& targets,
                         int style_label) const;

  // Inference on a throwaway tape; pitch/energy are de-normalized and the
  // export LPE is clamped to [0, 1].
  UmpmOutput infer_values(ParamStore& store, const Utterance& utt, int speaker_id) const;

  // Clamped 5-dim rows in the feature-file schema.
  PhonemeTargets to_feature_export(const std::string& utterance_id, const UmpmOutput& out) const;

 private:
  Tape::Id bilstm(Tape& tape, ParamNodes& params, Tape::Id x, const std::string& prefix) const;
  void register_bilstm(ParamStore& store, const std::string& prefix, int in_width,
                       int hidden) const;

  UmpmConfig config_;
  ToyEncoder encoder_;
  PeNorm pe_norm_;
  std::unordered_map<std::string, int> phoneme_index_;
};

}  // namespace proso

#endif  // PROSO_MODEL_UMPM_HPP_
