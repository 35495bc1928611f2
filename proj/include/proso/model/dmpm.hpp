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

#ifndef PROSO_MODEL_DMPM_HPP_
#define PROSO_MODEL_DMPM_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "proso/core/matrix.hpp"
#include "proso/core/tape.hpp"
#include "proso/corpus/types.hpp"
#include "proso/features/features.hpp"
#include "proso/model/params.hpp"
#include "proso/model/umpm.hpp"

namespace proso {

inline constexpr int kLpeDims = 3;

// Weights of the two discourse-level loss terms.
struct DiscourseLambdas {
  double lpe = 1.0;
  double style = 1.0;
};

struct DmpmConfig {
  int r = 32;  // utterance vector width; must match the stage-1 model (even)
  int n_styles = 2;
  int mlp_hidden = 32;
  int att_hidden = 32;
};

// One discourse assembled for the stage-2 model. All per-phoneme tensors are
// padded to (m * n_max) x 3 with zero rows; row_mask marks real phonemes and
// lpe_mask the rows the LPE loss counts (real, not a non-silent separator).
struct DiscourseBatch {
  std::string discourse_id;
  int m = 0;
  int n_max = 0;
  Matrix utterance_vectors;  // m x r
  Matrix lpe_stage1;         // (m * n_max) x 3
  Matrix lpe_targets;        // (m * n_max) x 3
  std::vector<std::uint8_t> row_mask;
  std::vector<std::uint8_t> lpe_mask;
  int style_label = 0;
};

void validate_batch(const DiscourseBatch& batch, int r);

// Runs the frozen stage-1 model over every utterance of the discourse and
// packs vectors, raw LPE predictions, targets and masks into one batch.
// Targets may be empty (inference); then lpe_targets stays zero and lpe_mask
// equals row_mask. stage1_out, when given, receives the per-utterance
// stage-1 inference results.
DiscourseBatch make_discourse_batch(const UmpmModel& stage1, ParamStore& store,
                                    const Discourse& discourse,
                                    const std::vector<PhonemeTargets>* targets,
                                    std::vector<UmpmOutput>* stage1_out = nullptr);

// Stage-2 discourse model: contextualizes frozen utterance vectors with a
// bidirectional recurrent layer, adjusts stage-1 LPE through a trainable
// r x 3 x 3 contraction, pools utterances by additive attention, and
// classifies discourse style with a fresh MLP head.
class DmpmModel {
 public:
  explicit DmpmModel(DmpmConfig config);

  void register_params(ParamStore& store) const;

  const DmpmConfig& config() const { return config_; }

  Tape::Id contextualize(Tape& tape, ParamNodes& params, Tape::Id utterance_vectors) const;

  struct Adjusted {
    Tape::Id delta = -1;      // (m * n_max) x 3
    Tape::Id lpe_final = -1;  // (m * n_max) x 3
  };
  Adjusted adjust_lpe(Tape& tape, Tape::Id d_adj, Tape::Id w, Tape::Id lpe_stage1, int m,
                      int n_max, const std::vector<std::uint8_t>& row_mask) const;

  struct Pooled {
    Tape::Id discourse_vector = -1;   // 1 x r
    Tape::Id attention_weights = -1;  // m x 1
  };
  Pooled pool_discourse(Tape& tape, ParamNodes& params, Tape::Id w) const;

  Tape::Id classify_style(Tape& tape, ParamNodes& params, Tape::Id discourse_vector) const;

  struct Nodes {
    Tape::Id w = -1;
    Tape::Id delta = -1;
    Tape::Id lpe_final = -1;
    Tape::Id discourse_vector = -1;
    Tape::Id attention_weights = -1;
    Tape::Id style_logits = -1;
    int m = 0;
    int n_max = 0;
  };
  Nodes forward(Tape& tape, ParamNodes& params, const DiscourseBatch& batch) const;

  struct Sse {
    Tape::Id lpe_sse = -1;
    Tape::Id style_ce = -1;
    int n_lpe_rows = 0;
  };
  Sse build_sse(Tape& tape, const Nodes& nodes, const DiscourseBatch& batch) const;

  struct LossNodes {
    Tape::Id lpe_mse = -1;
    Tape::Id style_ce = -1;
    Tape::Id total = -1;
  };
  LossNodes build_loss(Tape& tape, const Nodes& nodes, const DiscourseBatch& batch,
                       const DiscourseLambdas& lambdas) const;

 private:
  DmpmConfig config_;
};

}  // namespace proso

#endif  // PROSO_MODEL_DMPM_HPP_
