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

#include "proso/model/umpm.hpp"

#include <algorithm>
#include <utility>

#include "proso/core/error.hpp"
#include "proso/corpus/corpus.hpp"

namespace proso {

namespace {

int count_set(const std::vector<std::uint8_t>& mask) {
  int n = 0;
  for (std::uint8_t m : mask) n += m ? 1 : 0;
  return n;
}

void validate_config(const UmpmConfig& c) {
  if (c.encoder.d <= 0 || c.encoder.d % 2 != 0)
    throw ValidationError("model width d must be positive and even");
  if (c.encoder.r <= 0) throw ValidationError("utterance width r must be positive");
  if (c.phoneme_alphabet.empty()) throw ValidationError("phoneme alphabet is empty");
  if (c.n_speakers <= 0) throw ValidationError("speaker count must be positive");
  if (c.n_styles < 2) throw ValidationError("style count must be at least 2");
  if (c.mlp_hidden <= 0) throw ValidationError("mlp hidden width must be positive");
}

}  // namespace

std::vector<std::uint8_t> lpe_row_mask(const PhonemeTargets& targets) {
  size_t n = targets.pitch.size();
  std::vector<std::uint8_t> mask(n, 1);
  for (size_t i = 0; i < n; ++i) {
    bool all_zero = targets.pitch[i] == 0.0 && targets.energy[i] == 0.0 &&
                    targets.lpe[i][0] == 0.0 && targets.lpe[i][1] == 0.0 &&
                    targets.lpe[i][2] == 0.0;
    if (all_zero) mask[i] = 0;
  }
  return mask;
}

UtteranceSse utterance_sse(Tape& tape, Tape::Id pitch_hat, Tape::Id energy_hat, Tape::Id lpe_hat,
                           Tape::Id style_logits, const Matrix& pitch_target,
                           const Matrix& energy_target, const Matrix& lpe_target, int style_label,
                           const std::vector<std::uint8_t>& mask,
                           const std::vector<std::uint8_t>& lpe_mask) {
  UtteranceSse out;
  out.n_valid = count_set(mask);
  out.n_lpe_rows = count_set(lpe_mask);
  if (out.n_valid == 0) throw ValidationError("utterance loss: fully masked batch");
  out.pitch_sse = tape.masked_sse(pitch_hat, pitch_target, mask);
  out.energy_sse = tape.masked_sse(energy_hat, energy_target, mask);
  out.lpe_sse = tape.masked_sse(lpe_hat, lpe_target, lpe_mask);
  out.style_ce = tape.softmax_ce(style_logits, style_label);
  return out;
}

UtteranceLossNodes utterance_loss(Tape& tape, Tape::Id pitch_hat, Tape::Id energy_hat,
                                  Tape::Id lpe_hat, Tape::Id style_logits,
                                  const Matrix& pitch_target, const Matrix& energy_target,
                                  const Matrix& lpe_target, int style_label,
                                  const LossLambdas& lambdas,
                                  const std::vector<std::uint8_t>& mask,
                                  const std::vector<std::uint8_t>& lpe_mask) {
  UtteranceSse sse = utterance_sse(tape, pitch_hat, energy_hat, lpe_hat, style_logits,
                                   pitch_target, energy_target, lpe_target, style_label, mask,
                                   lpe_mask);
  UtteranceLossNodes out;
  out.pitch_mse = tape.scale(sse.pitch_sse, 1.0 / sse.n_valid);
  out.energy_mse = tape.scale(sse.energy_sse, 1.0 / sse.n_valid);
  out.lpe_mse = sse.n_lpe_rows > 0 ? tape.scale(sse.lpe_sse, 1.0 / (3.0 * sse.n_lpe_rows))
                                   : tape.constant(Matrix(1, 1));
  out.style_ce = sse.style_ce;
  Tape::Id total = tape.scale(out.pitch_mse, lambdas.pitch);
  total = tape.add(total, tape.scale(out.energy_mse, lambdas.energy));
  total = tape.add(total, tape.scale(out.lpe_mse, lambdas.lpe));
  total = tape.add(total, tape.scale(out.style_ce, lambdas.style));
  out.total = total;
  return out;
}

UmpmModel::UmpmModel(UmpmConfig config, Vocabulary vocab)
    : config_(std::move(config)), encoder_(config_.encoder, std::move(vocab)) {
  validate_config(config_);
  for (size_t i = 0; i < config_.phoneme_alphabet.size(); ++i) {
    const std::string& sym = config_.phoneme_alphabet[i];
    if (sym.empty()) throw ValidationError("phoneme alphabet contains an empty symbol");
    if (!phoneme_index_.emplace(sym, static_cast<int>(i)).second)
      throw ValidationError("duplicate phoneme symbol '" + sym + "' in alphabet");
  }
}

int UmpmModel::phoneme_id(const std::string& symbol) const {
  auto it = phoneme_index_.find(symbol);
  if (it == phoneme_index_.end())
    throw ValidationError("unknown phoneme symbol '" + symbol + "'");
  return it->second;
}

void UmpmModel::register_bilstm(ParamStore& store, const std::string& prefix, int in_width,
                                int hidden) const {
  for (const char* dir : {"fwd", "bwd"}) {
    std::string p = prefix + "." + dir;
    store.add(p + ".wx", in_width, 4 * hidden, ParamGroup::kRest, InitKind::kUniform);
    store.add(p + ".wh", hidden, 4 * hidden, ParamGroup::kRest, InitKind::kOrthogonalGates);
    store.add(p + ".b", 1, 4 * hidden, ParamGroup::kRest, InitKind::kZero);
  }
}

void UmpmModel::register_params(ParamStore& store) const {
  encoder_.register_params(store);
  int d = config_.encoder.d;
  int r = config_.encoder.r;
  int h = d / 2;
  store.add("umpm.dia", 2, d, ParamGroup::kRest, InitKind::kUniform);
  store.add("umpm.phn", static_cast<int>(config_.phoneme_alphabet.size()), d, ParamGroup::kRest,
            InitKind::kUniform);
  store.add("umpm.tone", kMaxTone + 1, d, ParamGroup::kRest, InitKind::kUniform);
  store.add("umpm.spk", config_.n_speakers, d, ParamGroup::kRest, InitKind::kUniform);
  if (!config_.ablate_pe) {
    register_bilstm(store, "umpm.pe.l1", d, h);
    register_bilstm(store, "umpm.pe.l2", d, h);
    store.add("umpm.pe.head.w", d, 2, ParamGroup::kRest, InitKind::kUniform);
    store.add("umpm.pe.head.b", 1, 2, ParamGroup::kRest, InitKind::kZero);
  }
  int lpe_in = config_.ablate_pe ? d : d + 2;
  register_bilstm(store, "umpm.lpe.l1", lpe_in, h);
  register_bilstm(store, "umpm.lpe.l2", d, h);
  store.add("umpm.lpe.head.w", d, 3, ParamGroup::kRest, InitKind::kUniform);
  store.add("umpm.lpe.head.b", 1, 3, ParamGroup::kRest, InitKind::kZero);
  store.add("umpm.style.w1", r, config_.mlp_hidden, ParamGroup::kRest, InitKind::kUniform);
  store.add("umpm.style.b1", 1, config_.mlp_hidden, ParamGroup::kRest, InitKind::kZero);
  store.add("umpm.style.w2", config_.mlp_hidden, config_.n_styles, ParamGroup::kRest,
            InitKind::kUniform);
  store.add("umpm.style.b2", 1, config_.n_styles, ParamGroup::kRest, InitKind::kZero);
}

std::vector<int> UmpmModel::length_regulation_indices(const Utterance& utt) {
  std::vector<int> idx;
  int token = -1;
  int last_lexical = -1;
  for (const WordToken& w : utt.words) {
    if (w.kind == WordKind::kSeparator) {
      if (last_lexical < 0)
        throw ValidationError("separator with no preceding lexical word in '" + utt.id + "'");
      idx.push_back(last_lexical);
      continue;
    }
    ++token;
    if (w.kind == WordKind::kLexical) {
      for (size_t i = 0; i < w.phonemes.size(); ++i) idx.push_back(token);
      last_lexical = token;
    }
  }
  return idx;
}

UmpmModel::WordFeats UmpmModel::word_features(Tape& tape, ParamNodes& params,
                                              const Utterance& utt) const {
  ToyEncoder::Nodes enc = encoder_.encode(tape, params, utt);
  std::vector<int> flags;
  flags.reserve(enc.n_tokens);
  for (const WordToken& w : utt.words)
    if (w.kind != WordKind::kSeparator) flags.push_back(w.dialogue_flag);
  Tape::Id dia = tape.gather_rows(params.id("umpm.dia"), flags);
  WordFeats out;
  out.word_vectors = tape.add(enc.word_vectors, dia);
  out.utterance_vector = enc.utterance_vector;
  out.n_tokens = enc.n_tokens;
  return out;
}

Tape::Id UmpmModel::length_regulate(Tape& tape, Tape::Id word_feats,
                                    const Utterance& utt) const {
  std::vector<int> idx = length_regulation_indices(utt);
  if (idx.empty()) throw ValidationError("utterance '" + utt.id + "' has no phonemes");
  return tape.gather_rows(word_feats, idx);
}

Tape::Id UmpmModel::fuse_phoneme_features(Tape& tape, ParamNodes& params, Tape::Id e_lr,
                                          const Utterance& utt, int speaker_id) const {
  if (speaker_id < 0 || speaker_id >= config_.n_speakers)
    throw ValidationError("unknown speaker id " + std::to_string(speaker_id));
  Tape::Id acc = e_lr;
  if (!config_.ablate_phn) {
    std::vector<PhonemeToken> phones = flat_phonemes(utt);
    std::vector<int> phn_ids;
    phn_ids.reserve(phones.size());
    for (const PhonemeToken& p : phones) phn_ids.push_back(phoneme_id(p.symbol));
    acc = tape.add(acc, tape.gather_rows(params.id("umpm.phn"), phn_ids));
    acc = tape.add(acc, tape.gather_rows(params.id("umpm.tone"), assign_tone_labels(utt)));
  }
  Tape::Id spk = tape.gather_rows(params.id("umpm.spk"), {speaker_id});
  return tape.add_rowvec(acc, spk);
}

Tape::Id UmpmModel::bilstm(Tape& tape, ParamNodes& params, Tape::Id x,
                           const std::string& prefix) const {
  Tape::Id f = tape.lstm_seq(x, params.id(prefix + ".fwd.wx"), params.id(prefix + ".fwd.wh"),
                             params.id(prefix + ".fwd.b"), false);
  Tape::Id b = tape.lstm_seq(x, params.id(prefix + ".bwd.wx"), params.id(prefix + ".bwd.wh"),
                             params.id(prefix + ".bwd.b"), true);
  return tape.concat_cols({f, b});
}

std::pair<Tape::Id, Tape::Id> UmpmModel::predict_pitch_energy(Tape& tape, ParamNodes& params,
                                                              Tape::Id e_pf) const {
  if (config_.ablate_pe) throw ValidationError("acoustic path is ablated (no_pe)");
  Tape::Id h1 = bilstm(tape, params, e_pf, "umpm.pe.l1");
  Tape::Id h2 = bilstm(tape, params, h1, "umpm.pe.l2");
  Tape::Id head = tape.add_rowvec(tape.matmul(h2, params.id("umpm.pe.head.w")),
                                  params.id("umpm.pe.head.b"));
  return {tape.slice_cols(head, 0, 1), tape.slice_cols(head, 1, 2)};
}

Tape::Id UmpmModel::predict_lpe(Tape& tape, ParamNodes& params, Tape::Id e_pf, Tape::Id pitch,
                                Tape::Id energy) const {
  Tape::Id x = e_pf;
  if (!config_.ablate_pe) {
    int n = tape.value(e_pf).rows;
    if (tape.value(pitch).rows != n || tape.value(pitch).cols != 1 ||
        tape.value(energy).rows != n || tape.value(energy).cols != 1)
      throw ValidationError("pitch/energy length does not match phoneme count");
    x = tape.concat_cols({e_pf, pitch, energy});
  }
  Tape::Id h1 = bilstm(tape, params, x, "umpm.lpe.l1");
  Tape::Id h2 = bilstm(tape, params, h1, "umpm.lpe.l2");
  return tape.add_rowvec(tape.matmul(h2, params.id("umpm.lpe.head.w")),
                         params.id("umpm.lpe.head.b"));
}

Tape::Id UmpmModel::classify_style(Tape& tape, ParamNodes& params,
                                   Tape::Id utterance_vector) const {
  Tape::Id hidden = tape.tanh(tape.add(tape.matmul(utterance_vector, params.id("umpm.style.w1")),
                                       params.id("umpm.style.b1")));
  return tape.add(tape.matmul(hidden, params.id("umpm.style.w2")), params.id("umpm.style.b2"));
}

UmpmNodes UmpmModel::forward(Tape& tape, ParamNodes& params, const Utterance& utt,
                             const PhonemeTargets* targets, RunMode mode, int speaker_id) const {
  int n = phoneme_count(utt);
  if (n == 0) throw ValidationError("utterance '" + utt.id + "' has no phonemes");
  if (mode == RunMode::kTrain && targets == nullptr)
    throw ValidationError("train mode requires phoneme targets");
  if (targets && static_cast<int>(targets->pitch.size()) != n)
    throw ValidationError("targets for '" + utt.id + "' have wrong length");

  WordFeats wf = word_features(tape, params, utt);
  Tape::Id e_lr = config_.ablate_word
                      ? tape.constant(Matrix(n, config_.encoder.d))
                      : length_regulate(tape, wf.word_vectors, utt);
  Tape::Id e_pf = fuse_phoneme_features(tape, params, e_lr, utt, speaker_id);

  UmpmNodes out;
  out.word_vectors = wf.word_vectors;
  out.utterance_vector = wf.utterance_vector;
  out.n_tokens = wf.n_tokens;
  out.n_phonemes = n;

  if (config_.ablate_pe) {
    out.pitch_hat = tape.constant(Matrix(n, 1));
    out.energy_hat = tape.constant(Matrix(n, 1));
    out.lpe_hat = predict_lpe(tape, params, e_pf, -1, -1);
  } else {
    auto [pitch_hat, energy_hat] = predict_pitch_energy(tape, params, e_pf);
    out.pitch_hat = pitch_hat;
    out.energy_hat = energy_hat;
    Tape::Id lpe_pitch = pitch_hat;
    Tape::Id lpe_energy = energy_hat;
    if (mode == RunMode::kTrain) {
      Matrix p(n, 1), e(n, 1);
      for (int i = 0; i < n; ++i) {
        p.data[i] = pe_norm_.norm_pitch(targets->pitch[i]);
        e.data[i] = pe_norm_.norm_energy(targets->energy[i]);
      }
      lpe_pitch = tape.constant(std::move(p));
      lpe_energy = tape.constant(std::move(e));
    }
    out.lpe_hat = predict_lpe(tape, params, e_pf, lpe_pitch, lpe_energy);
  }
  out.style_logits = classify_style(tape, params, wf.utterance_vector);
  return out;
}

UtteranceSse UmpmModel::build_sse(Tape& tape, const UmpmNodes& nodes,
                                  const PhonemeTargets& targets, int style_label) const {
  int n = nodes.n_phonemes;
  Matrix p(n, 1), e(n, 1), l(n, 3);
  for (int i = 0; i < n; ++i) {
    p.data[i] = pe_norm_.norm_pitch(targets.pitch[i]);
    e.data[i] = pe_norm_.norm_energy(targets.energy[i]);
    for (int k = 0; k < 3; ++k) l.data[i * 3 + k] = targets.lpe[i][k];
  }
  std::vector<std::uint8_t> mask(n, 1);
  return utterance_sse(tape, nodes.pitch_hat, nodes.energy_hat, nodes.lpe_hat,
                       nodes.style_logits, p, e, l, style_label, mask, lpe_row_mask(targets));
}

UtteranceLossNodes UmpmModel::build_loss(Tape& tape, const UmpmNodes& nodes,
                                         const PhonemeTargets& targets, int style_label,
                                         const LossLambdas& lambdas) const {
  int n = nodes.n_phonemes;
  Matrix p(n, 1), e(n, 1), l(n, 3);
  for (int i = 0; i < n; ++i) {
    p.data[i] = pe_norm_.norm_pitch(targets.pitch[i]);
    e.data[i] = pe_norm_.norm_energy(targets.energy[i]);
    for (int k = 0; k < 3; ++k) l.data[i * 3 + k] = targets.lpe[i][k];
  }
  std::vector<std::uint8_t> mask(n, 1);
  return utterance_loss(tape, nodes.pitch_hat, nodes.energy_hat, nodes.lpe_hat,
                        nodes.style_logits, p, e, l, style_label, lambdas, mask,
                        lpe_row_mask(targets));
}

UmpmOutput UmpmModel::infer_values(ParamStore& store, const Utterance& utt,
                                   int speaker_id) const {
  Tape tape;
  ParamNodes params(tape, store);
  UmpmNodes nodes = forward(tape, params, utt, nullptr, RunMode::kInfer, speaker_id);
  int n = nodes.n_phonemes;
  UmpmOutput out;
  out.pitch_hat.resize(n);
  out.energy_hat.resize(n);
  out.lpe_raw.resize(n);
  out.lpe_export.resize(n);
  const Matrix& p = tape.value(nodes.pitch_hat);
  const Matrix& e = tape.value(nodes.energy_hat);
  const Matrix& l = tape.value(nodes.lpe_hat);
  for (int i = 0; i < n; ++i) {
    out.pitch_hat[i] = pe_norm_.denorm_pitch(p.data[i]);
    out.energy_hat[i] = pe_norm_.denorm_energy(e.data[i]);
    for (int k = 0; k < 3; ++k) {
      double v = l.data[i * 3 + k];
      out.lpe_raw[i][k] = v;
      out.lpe_export[i][k] = std::clamp(v, 0.0, 1.0);
    }
  }
  out.style_logits = tape.value(nodes.style_logits).data;
  out.utterance_vector = tape.value(nodes.utterance_vector).data;
  return out;
}

PhonemeTargets UmpmModel::to_feature_export(const std::string& utterance_id,
                                            const UmpmOutput& out) const {
  PhonemeTargets t;
  t.utterance_id = utterance_id;
  t.pitch = out.pitch_hat;
  t.energy = out.energy_hat;
  t.lpe = out.lpe_export;
  return t;
}

}  // namespace proso
