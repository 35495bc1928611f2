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

#include "proso/model/dmpm.hpp"

#include <utility>

#include "proso/core/error.hpp"

namespace proso {

void validate_batch(const DiscourseBatch& batch, int r) {
  if (batch.m <= 0) throw ValidationError("discourse batch has no utterances");
  if (batch.n_max <= 0) throw ValidationError("discourse batch has no phoneme columns");
  int rows = batch.m * batch.n_max;
  if (batch.utterance_vectors.rows != batch.m || batch.utterance_vectors.cols != r)
    throw ValidationError("utterance_vectors shape mismatch in '" + batch.discourse_id + "'");
  if (batch.lpe_stage1.rows != rows || batch.lpe_stage1.cols != kLpeDims)
    throw ValidationError("lpe_stage1 shape mismatch in '" + batch.discourse_id + "'");
  if (batch.lpe_targets.rows != rows || batch.lpe_targets.cols != kLpeDims)
    throw ValidationError("lpe_targets shape mismatch in '" + batch.discourse_id + "'");
  if (static_cast<int>(batch.row_mask.size()) != rows ||
      static_cast<int>(batch.lpe_mask.size()) != rows)
    throw ValidationError("mask length mismatch in '" + batch.discourse_id + "'");
  for (int i = 0; i < rows; ++i) {
    if (batch.lpe_mask[i] && !batch.row_mask[i])
      throw ValidationError("lpe_mask marks a padded row in '" + batch.discourse_id + "'");
    if (!batch.row_mask[i])
      for (int k = 0; k < kLpeDims; ++k)
        if (batch.lpe_stage1.at(i, k) != 0.0)
          throw ValidationError("padded lpe_stage1 row is nonzero in '" + batch.discourse_id +
                                "'");
  }
}

DiscourseBatch make_discourse_batch(const UmpmModel& stage1, ParamStore& store,
                                    const Discourse& discourse,
                                    const std::vector<PhonemeTargets>* targets,
                                    std::vector<UmpmOutput>* stage1_out) {
  if (discourse.utterances.empty())
    throw ValidationError("discourse '" + discourse.id + "' has no utterances");
  if (targets && targets->size() != discourse.utterances.size())
    throw ValidationError("targets count mismatch for discourse '" + discourse.id + "'");

  int m = static_cast<int>(discourse.utterances.size());
  std::vector<UmpmOutput> outs;
  outs.reserve(m);
  int n_max = 0;
  for (const Utterance& utt : discourse.utterances) {
    outs.push_back(stage1.infer_values(store, utt, utt.speaker_id));
    n_max = std::max(n_max, static_cast<int>(outs.back().lpe_raw.size()));
  }

  DiscourseBatch batch;
  batch.discourse_id = discourse.id;
  batch.m = m;
  batch.n_max = n_max;
  batch.style_label = discourse.style_label;
  batch.utterance_vectors = Matrix(m, stage1.config().encoder.r);
  batch.lpe_stage1 = Matrix(m * n_max, kLpeDims);
  batch.lpe_targets = Matrix(m * n_max, kLpeDims);
  batch.row_mask.assign(m * n_max, 0);
  batch.lpe_mask.assign(m * n_max, 0);

  for (int u = 0; u < m; ++u) {
    const Utterance& utt = discourse.utterances[u];
    for (size_t j = 0; j < outs[u].utterance_vector.size(); ++j)
      batch.utterance_vectors.at(u, static_cast<int>(j)) = outs[u].utterance_vector[j];

    int n = static_cast<int>(outs[u].lpe_raw.size());
    std::vector<std::uint8_t> keep;
    if (targets) keep = lpe_row_mask((*targets)[u]);
    for (int i = 0; i < n; ++i) {
      int row = u * n_max + i;
      batch.row_mask[row] = 1;
      for (int k = 0; k < kLpeDims; ++k) batch.lpe_stage1.at(row, k) = outs[u].lpe_raw[i][k];
      if (targets) {
        const PhonemeTargets& t = (*targets)[u];
        if (static_cast<int>(t.lpe.size()) != n)
          throw ValidationError("target length mismatch for utterance '" + utt.id + "'");
        for (int k = 0; k < kLpeDims; ++k) batch.lpe_targets.at(row, k) = t.lpe[i][k];
        batch.lpe_mask[row] = keep[i];
      } else {
        batch.lpe_mask[row] = 1;
      }
    }
  }
  if (stage1_out) *stage1_out = std::move(outs);
  return batch;
}

DmpmModel::DmpmModel(DmpmConfig config) : config_(config) {
  if (config_.r <= 0 || config_.r % 2 != 0)
    throw ValidationError("context width r must be positive and even");
  if (config_.n_styles < 2) throw ValidationError("style count must be at least 2");
  if (config_.mlp_hidden <= 0 || config_.att_hidden <= 0)
    throw ValidationError("hidden widths must be positive");
}

void DmpmModel::register_params(ParamStore& store) const {
  int r = config_.r;
  int h = r / 2;
  for (const char* dir : {"fwd", "bwd"}) {
    std::string p = std::string("dmpm.ctx.") + dir;
    store.add(p + ".wx", r, 4 * h, ParamGroup::kStage2, InitKind::kUniform);
    store.add(p + ".wh", h, 4 * h, ParamGroup::kStage2, InitKind::kOrthogonalGates);
    store.add(p + ".b", 1, 4 * h, ParamGroup::kStage2, InitKind::kZero);
  }
  // Zero start: stage 2 opens exactly at the stage-1 predictions.
  store.add("dmpm.adj", r, kLpeDims * kLpeDims, ParamGroup::kStage2, InitKind::kZero);
  store.add("dmpm.att.w", r, config_.att_hidden, ParamGroup::kStage2, InitKind::kUniform);
  store.add("dmpm.att.b", 1, config_.att_hidden, ParamGroup::kStage2, InitKind::kZero);
  store.add("dmpm.att.v", config_.att_hidden, 1, ParamGroup::kStage2, InitKind::kUniform);
  store.add("dmpm.style.w1", r, config_.mlp_hidden, ParamGroup::kStage2, InitKind::kUniform);
  store.add("dmpm.style.b1", 1, config_.mlp_hidden, ParamGroup::kStage2, InitKind::kZero);
  store.add("dmpm.style.w2", config_.mlp_hidden, config_.n_styles, ParamGroup::kStage2,
            InitKind::kUniform);
  store.add("dmpm.style.b2", 1, config_.n_styles, ParamGroup::kStage2, InitKind::kZero);
}

Tape::Id DmpmModel::contextualize(Tape& tape, ParamNodes& params,
                                  Tape::Id utterance_vectors) const {
  if (tape.value(utterance_vectors).cols != config_.r)
    throw ValidationError("utterance vectors do not match context width");
  Tape::Id f = tape.lstm_seq(utterance_vectors, params.id("dmpm.ctx.fwd.wx"),
                             params.id("dmpm.ctx.fwd.wh"), params.id("dmpm.ctx.fwd.b"), false);
  Tape::Id b = tape.lstm_seq(utterance_vectors, params.id("dmpm.ctx.bwd.wx"),
                             params.id("dmpm.ctx.bwd.wh"), params.id("dmpm.ctx.bwd.b"), true);
  return tape.concat_cols({f, b});
}

DmpmModel::Adjusted DmpmModel::adjust_lpe(Tape& tape, Tape::Id d_adj, Tape::Id w,
                                          Tape::Id lpe_stage1, int m, int n_max,
                                          const std::vector<std::uint8_t>& row_mask) const {
  Adjusted out;
  out.delta = tape.lpe_adjust(d_adj, w, lpe_stage1, m, n_max, row_mask);
  out.lpe_final = tape.add(lpe_stage1, out.delta);
  return out;
}

DmpmModel::Pooled DmpmModel::pool_discourse(Tape& tape, ParamNodes& params, Tape::Id w) const {
  Tape::Id hidden = tape.tanh(
      tape.add_rowvec(tape.matmul(w, params.id("dmpm.att.w")), params.id("dmpm.att.b")));
  Tape::Id scores = tape.matmul(hidden, params.id("dmpm.att.v"));  // m x 1
  Pooled out;
  out.attention_weights = tape.softmax_flat(scores);
  out.discourse_vector = tape.matmul(tape.transpose(out.attention_weights), w);
  return out;
}

Tape::Id DmpmModel::classify_style(Tape& tape, ParamNodes& params,
                                   Tape::Id discourse_vector) const {
  Tape::Id hidden = tape.tanh(tape.add(tape.matmul(discourse_vector, params.id("dmpm.style.w1")),
                                       params.id("dmpm.style.b1")));
  return tape.add(tape.matmul(hidden, params.id("dmpm.style.w2")), params.id("dmpm.style.b2"));
}

DmpmModel::Nodes DmpmModel::forward(Tape& tape, ParamNodes& params,
                                    const DiscourseBatch& batch) const {
  validate_batch(batch, config_.r);
  Nodes out;
  out.m = batch.m;
  out.n_max = batch.n_max;
  Tape::Id vecs = tape.constant(batch.utterance_vectors);
  Tape::Id lpe1 = tape.constant(batch.lpe_stage1);
  out.w = contextualize(tape, params, vecs);
  Adjusted adj = adjust_lpe(tape, params.id("dmpm.adj"), out.w, lpe1, batch.m, batch.n_max,
                            batch.row_mask);
  out.delta = adj.delta;
  out.lpe_final = adj.lpe_final;
  Pooled pooled = pool_discourse(tape, params, out.w);
  out.discourse_vector = pooled.discourse_vector;
  out.attention_weights = pooled.attention_weights;
  out.style_logits = classify_style(tape, params, out.discourse_vector);
  return out;
}

DmpmModel::Sse DmpmModel::build_sse(Tape& tape, const Nodes& nodes,
                                    const DiscourseBatch& batch) const {
  Sse out;
  for (std::uint8_t m : batch.lpe_mask) out.n_lpe_rows += m ? 1 : 0;
  if (out.n_lpe_rows == 0)
    throw ValidationError("discourse loss: no unmasked LPE rows in '" + batch.discourse_id + "'");
  out.lpe_sse = tape.masked_sse(nodes.lpe_final, batch.lpe_targets, batch.lpe_mask);
  out.style_ce = tape.softmax_ce(nodes.style_logits, batch.style_label);
  return out;
}

DmpmModel::LossNodes DmpmModel::build_loss(Tape& tape, const Nodes& nodes,
                                           const DiscourseBatch& batch,
                                           const DiscourseLambdas& lambdas) const {
  Sse sse = build_sse(tape, nodes, batch);
  LossNodes out;
  out.lpe_mse = tape.scale(sse.lpe_sse, 1.0 / (kLpeDims * sse.n_lpe_rows));
  out.style_ce = sse.style_ce;
  out.total = tape.add(tape.scale(out.lpe_mse, lambdas.lpe),
                       tape.scale(out.style_ce, lambdas.style));
  return out;
}

}  // namespace proso
