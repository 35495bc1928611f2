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

#ifndef PROSO_TRAIN_TRAIN_HPP_
#define PROSO_TRAIN_TRAIN_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "proso/corpus/types.hpp"
#include "proso/features/features.hpp"
#include "proso/model/dmpm.hpp"
#include "proso/model/params.hpp"
#include "proso/model/umpm.hpp"
#include "proso/train/checkpoint.hpp"

namespace proso {

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // 0 disables gradient clipping
};

struct Stage1Config {
  double lr_encoder = 1e-5;
  double lr_rest = 1e-3;
  int batch_size = 16;
  int epochs = 40;
  std::uint64_t seed = 1;
  OptimizerConfig opt;
};

struct Stage2Config {
  double lr = 2e-4;
  int batch_size = 32;
  int epochs = 40;
  bool cache_stage1 = true;  // false recomputes frozen stage-1 outputs per epoch
  std::uint64_t seed = 1;
  OptimizerConfig opt;
};

struct ModelSettings {
  EncoderConfig encoder;
  int mlp_hidden = 32;
  int att_hidden = 32;
  LossLambdas lambdas;
  bool normalize_pitch_energy = false;
};

// Parsed view of the structured config file with sections [model],
// [train.stage1], [train.stage2] and [ablation].
struct TrainConfig {
  ModelSettings model;
  Stage1Config stage1;
  Stage2Config stage2;
  std::vector<std::string> ablation;
};

TrainConfig parse_train_config(std::istream& in);
TrainConfig load_train_config(const std::string& path);

// Maps ablation flag names onto model wiring; unknown names are an error.
void apply_ablation(const std::vector<std::string>& flags, UmpmConfig& config);

// Scales all unfrozen gradients so their global L2 norm is at most
// max_norm; returns the pre-clip norm. max_norm <= 0 only measures.
double clip_gradients(ParamStore& store, double max_norm);

// Adaptive-moment optimizer over a parameter store with one learning rate
// per parameter group. Frozen tensors must arrive with zero gradients;
// anything else is treated as a wiring bug and raised.
class Adam {
 public:
  Adam(ParamStore& store, const OptimizerConfig& opt);

  void set_lr(ParamGroup group, double lr);
  void step();
  long long steps() const { return t_; }

 private:
  ParamStore& store_;
  OptimizerConfig opt_;
  double lr_[3] = {0.0, 0.0, 0.0};
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long long t_ = 0;
};

struct EpochLoss {
  int epoch = 0;
  double pitch_mse = 0.0;
  double energy_mse = 0.0;
  double lpe_mse = 0.0;
  double style_ce = 0.0;
  double total = 0.0;

  friend bool operator==(const EpochLoss&, const EpochLoss&) = default;
};

void write_loss_history(const std::vector<EpochLoss>& history, std::ostream& out);
std::string loss_history_csv(const std::vector<EpochLoss>& history);

// In-memory training corpus: discourse structure plus per-utterance targets
// keyed by utterance id.
struct TrainData {
  std::vector<Discourse> discourses;
  std::map<std::string, PhonemeTargets> targets;
};

struct TrainOutput {
  Checkpoint checkpoint;
  std::vector<EpochLoss> history;
  long long steps = 0;
};

// Derives model dimensions from corpus plus settings exactly as the
// stage-1 trainer will; used to cross-check a checkpoint's config hash.
UmpmConfig derive_umpm_config(const TrainData& data, const ModelSettings& model,
                              const std::vector<std::string>& ablation);

TrainOutput train_stage1(const TrainData& data, const TrainConfig& config);

TrainOutput train_stage2(const TrainData& data, const Checkpoint& stage1_ckpt,
                         const TrainConfig& config);

}  // namespace proso

#endif  // PROSO_TRAIN_TRAIN_HPP_
