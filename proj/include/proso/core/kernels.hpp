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

#ifndef PROSO_CORE_KERNELS_HPP_
#define PROSO_CORE_KERNELS_HPP_

#include <cstdint>
#include <vector>

#include "proso/core/matrix.hpp"

// Compute kernels come in two flavors: a plain serial reference in
// proso::serial and an OpenMP version in proso::par. Both partition work by
// output element with identical inner accumulation order, so results are
// bitwise equal and runs stay reproducible regardless of thread count.
// proso::kern dispatches on problem size.

namespace proso {

// Per-utterance phoneme-level adjustment: contracts a trainable r x 3 x 3
// tensor (stored row-major as r x 9, index [r][j*3+k]) with per-utterance
// context vectors and per-phoneme 3-dim rows:
//   delta[u, p, k] = sum_r sum_j D[r][j*3+k] * W[u][r] * lpe[u*n_max + p][j]
// Rows with row_mask == 0 produce zero delta.
struct LpeAdjustGrads {
  Matrix d_tensor;  // r x 9
  Matrix d_ctx;     // m x r
  Matrix d_lpe;     // (m*n_max) x 3
};

namespace serial {

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate);
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate);
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate);

void lpe_adjust(const Matrix& tensor, const Matrix& ctx, const Matrix& lpe,
                const std::vector<uint8_t>& row_mask, int m, int n_max, Matrix& delta);
void lpe_adjust_backward(const Matrix& tensor, const Matrix& ctx, const Matrix& lpe,
                         const std::vector<uint8_t>& row_mask, int m, int n_max,
                         const Matrix& upstream, LpeAdjustGrads& grads);

}  // namespace serial

namespace par {

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate);
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate);
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate);

void lpe_adjust(const Matrix& tensor, const Matrix& ctx, const Matrix& lpe,
                const std::vector<uint8_t>& row_mask, int m, int n_max, Matrix& delta);
void lpe_adjust_backward(const Matrix& tensor, const Matrix& ctx, const Matrix& lpe,
                         const std::vector<uint8_t>& row_mask, int m, int n_max,
                         const Matrix& upstream, LpeAdjustGrads& grads);

}  // namespace par

namespace kern {

// Flop threshold below which the serial kernels win.
inline constexpr double kParallelFlopCutoff = 262144.0;

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false);

void lpe_adjust(const Matrix& tensor, const Matrix& ctx, const Matrix& lpe,
                const std::vector<uint8_t>& row_mask, int m, int n_max, Matrix& delta);
void lpe_adjust_backward(const Matrix& tensor, const Matrix& ctx, const Matrix& lpe,
                         const std::vector<uint8_t>& row_mask, int m, int n_max,
                         const Matrix& upstream, LpeAdjustGrads& grads);

// y (length n) += x (length k) * w (k x n); row-vector times matrix.
void vec_mat_acc(const double* x, const Matrix& w, double* y);

}  // namespace kern

}  // namespace proso

#endif  // PROSO_CORE_KERNELS_HPP_
