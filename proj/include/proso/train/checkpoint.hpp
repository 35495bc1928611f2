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

#ifndef PROSO_TRAIN_CHECKPOINT_HPP_
#define PROSO_TRAIN_CHECKPOINT_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "proso/core/matrix.hpp"
#include "proso/encoder/encoder.hpp"
#include "proso/model/dmpm.hpp"
#include "proso/model/params.hpp"
#include "proso/model/umpm.hpp"

namespace proso {

// Versioned PROSO-CKPT v1 container. A stage-1 checkpoint holds the encoder
// and U-MPM tensors; a stage-2 checkpoint additionally holds the D-MPM
// tensors next to the frozen stage-1 ones, so it is self-contained for
// inference. Doubles are written in shortest round-trip form, so
// load(save(x)) == x exactly.
struct Checkpoint {
  int stage = 1;
  std::uint64_t config_hash = 0;  // identity of the stage-1 model, see below
  UmpmConfig umpm;                // includes the phoneme alphabet
  DmpmConfig dmpm;                // meaningful when stage == 2
  std::vector<std::string> vocab_tokens;
  PeNorm pe_norm;
  std::vector<std::pair<std::string, Matrix>> tensors;
};

// Digest over everything that fixes the stage-1 parameter shapes and index
// meanings: encoder dims, speaker/style counts, ablations, vocabulary and
// phoneme alphabet in id order. Normalization constants and learned values
// are excluded.
std::uint64_t config_hash(const UmpmConfig& config, const Vocabulary& vocab);

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Snapshots every tensor of the store in registration order.
Checkpoint snapshot_checkpoint(int stage, const UmpmConfig& umpm, const DmpmConfig& dmpm,
                               const Vocabulary& vocab, const PeNorm& pe_norm,
                               const ParamStore& store);

// Copies checkpoint tensors into an already-registered store by name.
// Every checkpoint tensor must exist in the store with the same shape;
// store tensors absent from the checkpoint are left untouched.
void restore_params(const Checkpoint& ckpt, ParamStore& store);

Vocabulary vocab_from(const Checkpoint& ckpt);

}  // namespace proso

#endif  // PROSO_TRAIN_CHECKPOINT_HPP_
