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

#ifndef PROSO_MODEL_PARAMS_HPP_
#define PROSO_MODEL_PARAMS_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "proso/core/matrix.hpp"
#include "proso/core/rng.hpp"
#include "proso/core/tape.hpp"

namespace proso {

// Learning-rate group a tensor belongs to: the text encoder finetunes
// slowly, the remaining stage-1 tensors train fast, stage-2 tensors have
// their own rate.
enum class ParamGroup { kEncoder, kRest, kStage2 };

// How a tensor is filled at initialization time.
enum class InitKind { kUniform, kOrthogonalGates, kZero };

struct Param {
  std::string name;
  ParamGroup group = ParamGroup::kRest;
  InitKind init = InitKind::kUniform;
  bool frozen = false;
  Matrix value;
  Matrix grad;
};

class ParamStore {
 public:
  int add(const std::string& name, int rows, int cols, ParamGroup group,
          InitKind init = InitKind::kUniform);

  int index_of(const std::string& name) const;  // -1 when absent
  bool has(const std::string& name) const { return index_of(name) >= 0; }

  Param& at(int i) { return params_[i]; }
  const Param& at(int i) const { return params_[i]; }
  Param& by_name(const std::string& name);
  const Param& by_name(const std::string& name) const;

  int size() const { return static_cast<int>(params_.size()); }

  void zero_grads();
  void freeze_all();

  // Fills every tensor from a stream derived from (seed, name), so the
  // result does not depend on registration order.
  void initialize(uint64_t seed);

  // FNV digest over name, shape and raw value bytes of every tensor whose
  // name passes the filter (empty filter = all).
  uint64_t values_digest(const std::string& name_prefix = "") const;

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, int> index_;
};

// Per-tape leaf cache: at most one tape node per tensor. Frozen tensors
// enter the graph as constants, so no gradient can ever reach them.
// Gradients flow into grad_sink when given (one Matrix per param index),
// otherwise into the store's own grad buffers.
class ParamNodes {
 public:
  ParamNodes(Tape& tape, ParamStore& store, std::vector<Matrix>* grad_sink = nullptr);

  Tape::Id id(int param_index);
  Tape::Id id(const std::string& name);

 private:
  Tape& tape_;
  ParamStore& store_;
  std::vector<Matrix>* grad_sink_;
  std::vector<Tape::Id> cache_;
};

// Orthonormalizes each h x h gate block of a recurrent weight matrix
// (rows h, cols 4h) in place via modified Gram-Schmidt on random data.
void fill_orthogonal_gates(Rng& rng, Matrix& wh);

}  // namespace proso

#endif  // PROSO_MODEL_PARAMS_HPP_
