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

#include "proso/model/params.hpp"

#include <cmath>

#include "proso/core/digest.hpp"
#include "proso/core/error.hpp"

namespace proso {

int ParamStore::add(const std::string& name, int rows, int cols, ParamGroup group,
                    InitKind init) {
  if (index_.count(name)) throw ValidationError(cat("duplicate parameter '", name, "'"));
  if (rows <= 0 || cols <= 0)
    throw ValidationError(cat("parameter '", name, "': bad shape ", rows, "x", cols));
  Param p;
  p.name = name;
  p.group = group;
  p.init = init;
  p.value = Matrix::zeros(rows, cols);
  p.grad = Matrix::zeros(rows, cols);
  params_.push_back(std::move(p));
  int idx = static_cast<int>(params_.size()) - 1;
  index_[name] = idx;
  return idx;
}

int ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

Param& ParamStore::by_name(const std::string& name) {
  int i = index_of(name);
  if (i < 0) throw ValidationError(cat("unknown parameter '", name, "'"));
  return params_[i];
}

const Param& ParamStore::by_name(const std::string& name) const {
  int i = index_of(name);
  if (i < 0) throw ValidationError(cat("unknown parameter '", name, "'"));
  return params_[i];
}

void ParamStore::zero_grads() {
  for (Param& p : params_) p.grad.zero();
}

void ParamStore::freeze_all() {
  for (Param& p : params_) p.frozen = true;
}

void ParamStore::initialize(uint64_t seed) {
  for (Param& p : params_) {
    Rng rng(Rng::derive(seed, "init:" + p.name));
    switch (p.init) {
      case InitKind::kZero:
        p.value.zero();
        break;
      case InitKind::kUniform:
        for (double& v : p.value.data) v = rng.uniform(-0.1, 0.1);
        break;
      case InitKind::kOrthogonalGates:
        fill_orthogonal_gates(rng, p.value);
        break;
    }
  }
}

uint64_t ParamStore::values_digest(const std::string& name_prefix) const {
  Digest d;
  for (const Param& p : params_) {
    if (p.name.rfind(name_prefix, 0) != 0) continue;
    d.str(p.name);
    d.matrix(p.value);
  }
  return d.value();
}

ParamNodes::ParamNodes(Tape& tape, ParamStore& store, std::vector<Matrix>* grad_sink)
    : tape_(tape), store_(store), grad_sink_(grad_sink) {
  cache_.assign(static_cast<size_t>(store.size()), -1);
}

Tape::Id ParamNodes::id(int param_index) {
  if (param_index < 0 || param_index >= store_.size())
    throw ValidationError(cat("parameter index ", param_index, " out of range"));
  Tape::Id& slot = cache_[param_index];
  if (slot >= 0) return slot;
  Param& p = store_.at(param_index);
  if (p.frozen) {
    slot = tape_.constant(p.value);
  } else if (grad_sink_ != nullptr) {
    slot = tape_.param(&p.value, &(*grad_sink_)[param_index]);
  } else {
    slot = tape_.param(&p.value, &p.grad);
  }
  return slot;
}

Tape::Id ParamNodes::id(const std::string& name) {
  int i = store_.index_of(name);
  if (i < 0) throw ValidationError(cat("unknown parameter '", name, "'"));
  return id(i);
}

void fill_orthogonal_gates(Rng& rng, Matrix& wh) {
  int h = wh.rows;
  if (wh.cols % h != 0)
    throw ValidationError(cat("orthogonal gate init: cols ", wh.cols, " not a multiple of rows ", h));
  int blocks = wh.cols / h;
  for (int blk = 0; blk < blocks; ++blk) {
    // Random block, then two passes of modified Gram-Schmidt over columns.
    Matrix q(h, h);
    for (double& v : q.data) v = rng.uniform(-1.0, 1.0);
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j < h; ++j) {
        for (int prev = 0; prev < j; ++prev) {
          double dot = 0.0;
          for (int i = 0; i < h; ++i) dot += q.at(i, j) * q.at(i, prev);
          for (int i = 0; i < h; ++i) q.at(i, j) -= dot * q.at(i, prev);
        }
        double norm = 0.0;
        for (int i = 0; i < h; ++i) norm += q.at(i, j) * q.at(i, j);
        norm = std::sqrt(norm);
        if (norm < 1e-12)
          throw ValidationError("orthogonal gate init: degenerate random block");
        for (int i = 0; i < h; ++i) q.at(i, j) /= norm;
      }
    }
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < h; ++j) wh.at(i, blk * h + j) = q.at(i, j);
  }
}

}  // namespace proso
