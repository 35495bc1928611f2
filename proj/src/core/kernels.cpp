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

#include "proso/core/kernels.hpp"

namespace proso {

namespace {

void check_gemm_nn(const Matrix& a, const Matrix& b, Matrix& out, bool acc) {
  if (a.cols != b.rows) {
    throw ValidationError(cat("gemm_nn: inner dims ", a.cols, " vs ", b.rows));
  }
  if (!acc) {
    out = Matrix(a.rows, b.cols);
  } else {
    require_shape(out, a.rows, b.cols, "gemm_nn accumulate target");
  }
}

void check_gemm_nt(const Matrix& a, const Matrix& b, Matrix& out, bool acc) {
  if (a.cols != b.cols) {
    throw ValidationError(cat("gemm_nt: inner dims ", a.cols, " vs ", b.cols));
  }
  if (!acc) {
    out = Matrix(a.rows, b.rows);
  } else {
    require_shape(out, a.rows, b.rows, "gemm_nt accumulate target");
  }
}

void check_gemm_tn(const Matrix& a, const Matrix& b, Matrix& out, bool acc) {
  if (a.rows != b.rows) {
    throw ValidationError(cat("gemm_tn: inner dims ", a.rows, " vs ", b.rows));
  }
  if (!acc) {
    out = Matrix(a.cols, b.cols);
  } else {
    require_shape(out, a.cols, b.cols, "gemm_tn accumulate target");
  }
}

// One output row of out = a * b. Row-major b, so iterate k outer, j inner.
inline void gemm_nn_row(const Matrix& a, const Matrix& b, Matrix& out, int i) {
  double* o = out.row(i);
  const double* ai = a.row(i);
  for (int k = 0; k < a.cols; ++k) {
    const double av = ai[k];
    if (av == 0.0) continue;
    const double* bk = b.row(k);
    for (int j = 0; j < b.cols; ++j) o[j] += av * bk[j];
  }
}

inline void gemm_nt_row(const Matrix& a, const Matrix& b, Matrix& out, int i) {
  double* o = out.row(i);
  const double* ai = a.row(i);
  for (int j = 0; j < b.rows; ++j) {
    const double* bj = b.row(j);
    double s = 0.0;
    for (int k = 0; k < a.cols; ++k) s += ai[k] * bj[k];
    o[j] += s;
  }
}

// out (cols_a x cols_b) row i accumulates a(:,i)^T * b.
inline void gemm_tn_row(const Matrix& a, const Matrix& b, Matrix& out, int i) {
  double* o = out.row(i);
  for (int k = 0; k < a.rows; ++k) {
    const double av = a.at(k, i);
    if (av == 0.0) continue;
    const double* bk = b.row(k);
    for (int j = 0; j < b.cols; ++j) o[j] += av * bk[j];
  }
}

inline void adjust_mix(const Matrix& tensor, const Matrix& ctx, Matrix& mix) {
  // mix[u][j*3+k] = sum_r ctx[u][r] * tensor[r][j*3+k]
  serial::gemm_nn(ctx, tensor, mix, false);
}

inline void adjust_row(const Matrix& lpe, const Matrix& mix, int u, size_t row, Matrix& delta) {
  const double* a = lpe.row(static_cast<int>(row));
  const double* mu = mix.row(u);
  double* d = delta.row(static_cast<int>(row));
  for (int k = 0; k < 3; ++k) {
    d[k] = a[0] * mu[0 * 3 + k] + a[1] * mu[1 * 3 + k] + a[2] * mu[2 * 3 + k];
  }
}

void check_adjust(const Matrix& tensor, const Matrix& ctx, const Matrix& lpe,
                  const std::vector<uint8_t>& row_mask, int m, int n_max) {
  if (tensor.cols != 9) throw ValidationError("lpe_adjust: tensor must be r x 9");
  if (ctx.cols != tensor.rows) {
    throw ValidationError(cat("lpe_adjust: ctx width ", ctx.cols, " vs tensor rank ",
                              tensor.rows));
  }
  if (ctx.rows != m) throw ValidationError("lpe_adjust: ctx rows != m");
  if (lpe.cols != 3 || lpe.rows != m * n_max) {
    throw ValidationError("lpe_adjust: lpe must be (m*n_max) x 3");
  }
  if (row_mask.size() != static_cast<size_t>(m) * n_max) {
    throw ValidationError("lpe_adjust: mask size mismatch");
  }
}

}  // namespace

namespace serial {

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  check_gemm_nn(a, b, out, accumulate);
  for (int i = 0; i < a.rows; ++i) gemm_nn_row(a, b, out, i);
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  check_gemm_nt(a, b, out, accumulate);
  for (int i = 0; i < a.rows; ++i) gemm_nt_row(a, b, out, i);
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  check_gemm_tn(a, b, out, accumulate);
  for (int i = 0; i < a.cols; ++i) gemm_tn_row(a, b, out, i);
}

void lpe_adjust(const Matrix& tensor, const Matrix& ctx, const Matrix& lpe,
                const std::vector<uint8_t>& row_mask, int m, int n_max, Matrix& delta) {
  check_adjust(tensor, ctx, lpe, row_mask, m, n_max);
  delta = Matrix(lpe.rows, 3);
  Matrix mix;
  adjust_mix(tensor, ctx, mix);
  for (int u = 0; u < m; ++u) {
    for (int p = 0; p < n_max; ++p) {
      const size_t row = static_cast<size_t>(u) * n_max + p;
      if (!row_mask[row]) continue;
      adjust_row(lpe, mix, u, row, delta);
    }
  }
}

void lpe_adjust_backward(const Matrix& tensor, const Matrix& ctx, const Matrix& lpe,
                         const std::vector<uint8_t>& row_mask, int m, int n_max,
                         const Matrix& upstream, LpeAdjustGrads& grads) {
  check_adjust(tensor, ctx, lpe, row_mask, m, n_max);
  require_shape(upstream, lpe.rows, 3, "lpe_adjust upstream");
  Matrix mix;
  adjust_mix(tensor, ctx, mix);
  grads.d_tensor = Matrix(tensor.rows, 9);
  grads.d_ctx = Matrix(m, ctx.cols);
  grads.d_lpe = Matrix(lpe.rows, 3);
  Matrix d_mix(m, 9);
  for (int u = 0; u < m; ++u) {
    double* dmu = d_mix.row(u);
    const double* mu = mix.row(u);
    for (int p = 0; p < n_max; ++p) {
      const size_t row = static_cast<size_t>(u) * n_max + p;
      if (!row_mask[row]) continue;
      const double* a = lpe.row(static_cast<int>(row));
      const double* g = upstream.row(static_cast<int>(row));
      double* da = grads.d_lpe.row(static_cast<int>(row));
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) {
          dmu[j * 3 + k] += a[j] * g[k];
          da[j] += g[k] * mu[j * 3 + k];
        }
      }
    }
  }
  // mix = ctx * tensor, so d_ctx = d_mix * tensor^T and d_tensor = ctx^T * d_mix.
  serial::gemm_nt(d_mix, tensor, grads.d_ctx, false);
  serial::gemm_tn(ctx, d_mix, grads.d_tensor, false);
}

}  // namespace serial

namespace par {

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  check_gemm_nn(a, b, out, accumulate);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) gemm_nn_row(a, b, out, i);
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  check_gemm_nt(a, b, out, accumulate);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) gemm_nt_row(a, b, out, i);
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  check_gemm_tn(a, b, out, accumulate);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.cols; ++i) gemm_tn_row(a, b, out, i);
}

void lpe_adjust(const Matrix& tensor, const Matrix& ctx, const Matrix& lpe,
                const std::vector<uint8_t>& row_mask, int m, int n_max, Matrix& delta) {
  check_adjust(tensor, ctx, lpe, row_mask, m, n_max);
  delta = Matrix(lpe.rows, 3);
  Matrix mix;
  adjust_mix(tensor, ctx, mix);
#pragma omp parallel for schedule(static)
  for (int u = 0; u < m; ++u) {
    for (int p = 0; p < n_max; ++p) {
      const size_t row = static_cast<size_t>(u) * n_max + p;
      if (!row_mask[row]) continue;
      adjust_row(lpe, mix, u, row, delta);
    }
  }
}

void lpe_adjust_backward(const Matrix& tensor, const Matrix& ctx, const Matrix& lpe,
                         const std::vector<uint8_t>& row_mask, int m, int n_max,
                         const Matrix& upstream, LpeAdjustGrads& grads) {
  check_adjust(tensor, ctx, lpe, row_mask, m, n_max);
  require_shape(upstream, lpe.rows, 3, "lpe_adjust upstream");
  Matrix mix;
  adjust_mix(tensor, ctx, mix);
  grads.d_tensor = Matrix(tensor.rows, 9);
  grads.d_ctx = Matrix(m, ctx.cols);
  grads.d_lpe = Matrix(lpe.rows, 3);
  Matrix d_mix(m, 9);
  // Each utterance owns a disjoint slice of d_mix and d_lpe.
#pragma omp parallel for schedule(static)
  for (int u = 0; u < m; ++u) {
    double* dmu = d_mix.row(u);
    const double* mu = mix.row(u);
    for (int p = 0; p < n_max; ++p) {
      const size_t row = static_cast<size_t>(u) * n_max + p;
      if (!row_mask[row]) continue;
      const double* a = lpe.row(static_cast<int>(row));
      const double* g = upstream.row(static_cast<int>(row));
      double* da = grads.d_lpe.row(static_cast<int>(row));
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) {
          dmu[j * 3 + k] += a[j] * g[k];
          da[j] += g[k] * mu[j * 3 + k];
        }
      }
    }
  }
  serial::gemm_nt(d_mix, tensor, grads.d_ctx, false);
  serial::gemm_tn(ctx, d_mix, grads.d_tensor, false);
}

}  // namespace par

namespace kern {

namespace {
inline bool big(double flops) { return flops >= kParallelFlopCutoff; }
}  // namespace

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  const double work = static_cast<double>(a.rows) * a.cols * b.cols;
  big(work) ? par::gemm_nn(a, b, out, accumulate) : serial::gemm_nn(a, b, out, accumulate);
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  const double work = static_cast<double>(a.rows) * a.cols * b.rows;
  big(work) ? par::gemm_nt(a, b, out, accumulate) : serial::gemm_nt(a, b, out, accumulate);
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  const double work = static_cast<double>(a.rows) * a.cols * b.cols;
  big(work) ? par::gemm_tn(a, b, out, accumulate) : serial::gemm_tn(a, b, out, accumulate);
}

void lpe_adjust(const Matrix& tensor, const Matrix& ctx, const Matrix& lpe,
                const std::vector<uint8_t>& row_mask, int m, int n_max, Matrix& delta) {
  const double work = static_cast<double>(lpe.rows) * 9 + static_cast<double>(m) * ctx.cols * 9;
  big(work) ? par::lpe_adjust(tensor, ctx, lpe, row_mask, m, n_max, delta)
            : serial::lpe_adjust(tensor, ctx, lpe, row_mask, m, n_max, delta);
}

void lpe_adjust_backward(const Matrix& tensor, const Matrix& ctx, const Matrix& lpe,
                         const std::vector<uint8_t>& row_mask, int m, int n_max,
                         const Matrix& upstream, LpeAdjustGrads& grads) {
  const double work = static_cast<double>(lpe.rows) * 18;
  big(work) ? par::lpe_adjust_backward(tensor, ctx, lpe, row_mask, m, n_max, upstream, grads)
            : serial::lpe_adjust_backward(tensor, ctx, lpe, row_mask, m, n_max, upstream,
                                          grads);
}

void vec_mat_acc(const double* x, const Matrix& w, double* y) {
  for (int i = 0; i < w.rows; ++i) {
    const double xv = x[i];
    if (xv == 0.0) continue;
    const double* wi = w.row(i);
    for (int j = 0; j < w.cols; ++j) y[j] += xv * wi[j];
  }
}

}  // namespace kern

}  // namespace proso
