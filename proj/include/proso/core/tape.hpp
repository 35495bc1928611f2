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

#ifndef PROSO_CORE_TAPE_HPP_
#define PROSO_CORE_TAPE_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "proso/core/matrix.hpp"

namespace proso {

// Reverse-mode tape over Matrix values. Forward ops evaluate eagerly and
// record a closure that scatters gradients to their parents. Every analytic
// gradient here is pinned by finite-difference tests.
//
// Tapes are single-threaded and cheap to build per utterance; concurrent
// training runs one tape per batch slot.
class Tape {
 public:
  using Id = int;

  Id constant(Matrix v);
  // Leaf bound to external storage: value is read at registration, gradient
  // is accumulated into *grad (resized if empty) during backward().
  Id param(const Matrix* value, Matrix* grad);

  Id matmul(Id a, Id b);
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id add_rowvec(Id a, Id row);   // row broadcast over all rows of a
  Id scale(Id a, double s);
  Id sigmoid(Id a);
  Id tanh(Id a);
  Id concat_cols(const std::vector<Id>& xs);
  Id slice_rows(Id a, int r0, int r1);
  Id slice_cols(Id a, int c0, int c1);
  Id gather_rows(Id table, std::vector<int> ids);
  Id transpose(Id a);
  Id mean_rows(Id a);            // 1 x C
  Id softmax_flat(Id a);         // softmax over all entries, shape preserved
  Id softmax_ce(Id logits, int label);  // logits 1 x C -> 1 x 1
  // Sum over rows with mask!=0 of squared elementwise error. 1 x 1.
  Id masked_sse(Id pred, Matrix target, std::vector<uint8_t> row_mask);

  // Single-direction LSTM over a sequence: x is T x in, weights wx (in x 4h),
  // wh (h x 4h), bias b (1 x 4h); gate order [i f g o]. Output row t is the
  // hidden state after consuming row t (in reading order for reverse=false,
  // from the end for reverse=true). Initial h and c are zero.
  Id lstm_seq(Id x, Id wx, Id wh, Id b, bool reverse);

  // delta[u,p,k] = sum_{r,j} tensor[r][j*3+k] * ctx[u][r] * lpe[u*n_max+p][j],
  // zero at masked rows.
  Id lpe_adjust(Id tensor, Id ctx, Id lpe, int m, int n_max, std::vector<uint8_t> row_mask);

  const Matrix& value(Id id) const { return nodes_[id].value; }
  double scalar(Id id) const { return nodes_[id].value.data[0]; }
  size_t size() const { return nodes_.size(); }

  // Seeds the listed scalar (1x1) nodes with the given weights and runs one
  // reverse sweep. Leaf gradients land in their bound external matrices.
  void backward(const std::vector<std::pair<Id, double>>& seeds);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    std::function<void(Tape&, Node&)> back;
  };

  Id push(Matrix value, bool needs_grad, std::function<void(Tape&, Node&)> back);
  Matrix& grad_of(Id id);
  bool wants(Id id) const { return nodes_[id].needs_grad; }

  std::vector<Node> nodes_;
};

}  // namespace proso

#endif  // PROSO_CORE_TAPE_HPP_
