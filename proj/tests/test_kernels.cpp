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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "proso/core/rng.hpp"
#include "testutil.hpp"

namespace proso {
namespace {

using testutil::random_matrix;

// Straight triple loops, no blocking, no zero skipping. The reference the
// tuned kernels are judged against.
Matrix naive_nn(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(k, j);
      out.at(i, j) = s;
    }
  return out;
}

Matrix naive_nt(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(j, k);
      out.at(i, j) = s;
    }
  return out;
}

Matrix naive_tn(const Matrix& a, const Matrix& b) {
  Matrix out(a.cols, b.cols);
  for (int i = 0; i < a.cols; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.rows; ++k) s += a.at(k, i) * b.at(k, j);
      out.at(i, j) = s;
    }
  return out;
}

// Direct transcription of the contraction: delta[u,p,k] depends on the rank
// index r and the input coordinate j only through products of three factors.
Matrix naive_adjust(const Matrix& tensor, const Matrix& ctx, const Matrix& lpe,
                    const std::vector<uint8_t>& mask, int m, int n_max) {
  Matrix delta(lpe.rows, 3);
  int r_rank = tensor.rows;
  for (int u = 0; u < m; ++u)
    for (int p = 0; p < n_max; ++p) {
      size_t row = static_cast<size_t>(u) * n_max + p;
      if (!mask[row]) continue;
      for (int k = 0; k < 3; ++k) {
        double s = 0.0;
        for (int r = 0; r < r_rank; ++r)
          for (int j = 0; j < 3; ++j)
            s += tensor.at(r, j * 3 + k) * ctx.at(u, r) * lpe.at(static_cast<int>(row), j);
        delta.at(static_cast<int>(row), k) = s;
      }
    }
  return delta;
}

void check_close(const Matrix& a, const Matrix& b, double tol) {
  REQUIRE(a.rows == b.rows);
  REQUIRE(a.cols == b.cols);
  for (size_t i = 0; i < a.data.size(); ++i) {
    REQUIRE(std::fabs(a.data[i] - b.data[i]) <= tol * std::max(1.0, std::fabs(b.data[i])));
  }
}

TEST_CASE("gemm variants match the naive reference") {
  Rng rng(123);
  for (int trial = 0; trial < 30; ++trial) {
    int m = rng.range(1, 17);
    int k = rng.range(1, 17);
    int n = rng.range(1, 17);
    Matrix a = random_matrix(rng, m, k);
    Matrix b = random_matrix(rng, k, n);
    Matrix bt = random_matrix(rng, n, k);
    Matrix at = random_matrix(rng, k, m);

    Matrix out;
    serial::gemm_nn(a, b, out, false);
    check_close(out, naive_nn(a, b), 1e-12);

    serial::gemm_nt(a, bt, out, false);
    check_close(out, naive_nt(a, bt), 1e-12);

    serial::gemm_tn(at, b, out, false);
    check_close(out, naive_tn(at, b), 1e-12);
  }
}

TEST_CASE("gemm accumulate adds onto the target") {
  Rng rng(7);
  Matrix a = random_matrix(rng, 5, 4);
  Matrix b = random_matrix(rng, 4, 6);
  Matrix base = random_matrix(rng, 5, 6);
  Matrix out = base;
  serial::gemm_nn(a, b, out, true);
  Matrix expect = naive_nn(a, b);
  for (size_t i = 0; i < expect.data.size(); ++i) expect.data[i] += base.data[i];
  check_close(out, expect, 1e-12);
}

TEST_CASE("parallel gemm is bitwise identical to serial") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    int m = rng.range(1, 64);
    int k = rng.range(1, 64);
    int n = rng.range(1, 64);
    Matrix a = random_matrix(rng, m, k);
    Matrix b = random_matrix(rng, k, n);
    Matrix s_out, p_out;
    serial::gemm_nn(a, b, s_out, false);
    par::gemm_nn(a, b, p_out, false);
    CHECK(s_out == p_out);

    Matrix bt = random_matrix(rng, n, k);
    serial::gemm_nt(a, bt, s_out, false);
    par::gemm_nt(a, bt, p_out, false);
    CHECK(s_out == p_out);

    Matrix at = random_matrix(rng, k, m);
    serial::gemm_tn(at, b, s_out, false);
    par::gemm_tn(at, b, p_out, false);
    CHECK(s_out == p_out);
  }
}

TEST_CASE("lpe_adjust matches the naive contraction and zeroes masked rows") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    int m = rng.range(1, 5);
    int n_max = rng.range(1, 8);
    int rank = rng.range(1, 6);
    Matrix tensor = random_matrix(rng, rank, 9);
    Matrix ctx = random_matrix(rng, m, rank);
    Matrix lpe = random_matrix(rng, m * n_max, 3);
    std::vector<uint8_t> mask(static_cast<size_t>(m) * n_max);
    for (auto& v : mask) v = rng.chance(0.7) ? 1 : 0;

    Matrix s_out, p_out;
    serial::lpe_adjust(tensor, ctx, lpe, mask, m, n_max, s_out);
    par::lpe_adjust(tensor, ctx, lpe, mask, m, n_max, p_out);
    CHECK(s_out == p_out);
    check_close(s_out, naive_adjust(tensor, ctx, lpe, mask, m, n_max), 1e-12);

    for (size_t row = 0; row < mask.size(); ++row) {
      if (mask[row]) continue;
      for (int k = 0; k < 3; ++k) CHECK(s_out.at(static_cast<int>(row), k) == 0.0);
    }
  }
}

TEST_CASE("lpe_adjust_backward matches a naive gradient transcription") {
  Rng rng(47);
  int m = 3, n_max = 5, rank = 4;
  Matrix tensor = random_matrix(rng, rank, 9);
  Matrix ctx = random_matrix(rng, m, rank);
  Matrix lpe = random_matrix(rng, m * n_max, 3);
  Matrix up = random_matrix(rng, m * n_max, 3);
  std::vector<uint8_t> mask(static_cast<size_t>(m) * n_max, 1);
  mask[2] = 0;
  mask[8] = 0;

  LpeAdjustGrads grads;
  serial::lpe_adjust_backward(tensor, ctx, lpe, mask, m, n_max, up, grads);

  Matrix d_tensor(rank, 9), d_ctx(m, rank), d_lpe(m * n_max, 3);
  for (int u = 0; u < m; ++u)
    for (int p = 0; p < n_max; ++p) {
      int row = u * n_max + p;
      if (!mask[row]) continue;
      for (int k = 0; k < 3; ++k) {
        double g = up.at(row, k);
        for (int r = 0; r < rank; ++r)
          for (int j = 0; j < 3; ++j) {
            d_tensor.at(r, j * 3 + k) += g * ctx.at(u, r) * lpe.at(row, j);
            d_ctx.at(u, r) += g * tensor.at(r, j * 3 + k) * lpe.at(row, j);
            d_lpe.at(row, j) += g * tensor.at(r, j * 3 + k) * ctx.at(u, r);
          }
      }
    }
  check_close(grads.d_tensor, d_tensor, 1e-11);
  check_close(grads.d_ctx, d_ctx, 1e-11);
  check_close(grads.d_lpe, d_lpe, 1e-11);

  LpeAdjustGrads pgrads;
  par::lpe_adjust_backward(tensor, ctx, lpe, mask, m, n_max, up, pgrads);
  CHECK(grads.d_tensor == pgrads.d_tensor);
  CHECK(grads.d_ctx == pgrads.d_ctx);
  CHECK(grads.d_lpe == pgrads.d_lpe);
}

TEST_CASE("vec_mat_acc accumulates x * W") {
  Rng rng(5);
  Matrix w = random_matrix(rng, 4, 7);
  Matrix x = random_matrix(rng, 1, 4);
  std::vector<double> y(7, 0.5);
  kern::vec_mat_acc(x.data.data(), w, y.data());
  Matrix expect = naive_nn(x, w);
  for (int j = 0; j < 7; ++j)
    CHECK(std::fabs(y[j] - (0.5 + expect.data[j])) < 1e-12);
}

TEST_CASE("gemm rejects mismatched shapes") {
  Matrix a(2, 3), b(4, 2), out;
  CHECK_THROWS_AS(serial::gemm_nn(a, b, out, false), ValidationError);
  CHECK_THROWS_AS(serial::gemm_nt(a, Matrix(2, 4), out, false), ValidationError);
  CHECK_THROWS_AS(serial::gemm_tn(a, Matrix(3, 2), out, false), ValidationError);
}

}  // namespace
}  // namespace proso
