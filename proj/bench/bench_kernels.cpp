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

// Times the serial reference kernels against the OpenMP versions on a range
// of shapes and checks bitwise agreement on every measured case. Speedups
// below 1.0 are expected on small shapes and single-core machines; the point
// of the table is the crossover, not the absolute numbers.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "proso/core/kernels.hpp"
#include "proso/core/rng.hpp"

namespace proso {
namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up, also primes the OpenMP thread pool
  auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) return false;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

struct Row {
  std::string kernel;
  std::string shape;
  double serial_ms = 0.0;
  double par_ms = 0.0;
  bool match = false;
};

Row bench_gemm(const std::string& which, int n, int reps, Rng& rng) {
  Matrix a = random_matrix(n, n, rng);
  Matrix b = random_matrix(n, n, rng);
  Matrix out_serial(n, n);
  Matrix out_par(n, n);

  auto pick = [&which](const Matrix& x, const Matrix& y, Matrix& out) {
    if (which == "gemm_nn") return serial::gemm_nn(x, y, out, false);
    if (which == "gemm_nt") return serial::gemm_nt(x, y, out, false);
    return serial::gemm_tn(x, y, out, false);
  };
  auto pick_par = [&which](const Matrix& x, const Matrix& y, Matrix& out) {
    if (which == "gemm_nn") return par::gemm_nn(x, y, out, false);
    if (which == "gemm_nt") return par::gemm_nt(x, y, out, false);
    return par::gemm_tn(x, y, out, false);
  };

  Row row;
  row.kernel = which;
  row.shape = std::to_string(n) + "x" + std::to_string(n);
  row.serial_ms = time_ms([&] { pick(a, b, out_serial); }, reps);
  row.par_ms = time_ms([&] { pick_par(a, b, out_par); }, reps);
  row.match = bitwise_equal(out_serial, out_par);
  return row;
}

Row bench_lpe_adjust(int m, int n_max, int r, int reps, Rng& rng, bool backward) {
  Matrix tensor = random_matrix(r, 9, rng);
  Matrix ctx = random_matrix(m, r, rng);
  Matrix lpe = random_matrix(m * n_max, 3, rng);
  std::vector<uint8_t> mask(static_cast<size_t>(m) * n_max);
  for (auto& v : mask) v = rng.chance(0.8) ? 1 : 0;

  Row row;
  row.kernel = backward ? "lpe_adjust_bwd" : "lpe_adjust";
  row.shape = "m=" + std::to_string(m) + ",n=" + std::to_string(n_max) +
              ",r=" + std::to_string(r);
  if (!backward) {
    Matrix out_serial(m * n_max, 3);
    Matrix out_par(m * n_max, 3);
    row.serial_ms =
        time_ms([&] { serial::lpe_adjust(tensor, ctx, lpe, mask, m, n_max, out_serial); }, reps);
    row.par_ms =
        time_ms([&] { par::lpe_adjust(tensor, ctx, lpe, mask, m, n_max, out_par); }, reps);
    row.match = bitwise_equal(out_serial, out_par);
    return row;
  }

  Matrix upstream = random_matrix(m * n_max, 3, rng);
  LpeAdjustGrads g_serial{Matrix(r, 9), Matrix(m, r), Matrix(m * n_max, 3)};
  LpeAdjustGrads g_par{Matrix(r, 9), Matrix(m, r), Matrix(m * n_max, 3)};
  row.serial_ms = time_ms(
      [&] {
        serial::lpe_adjust_backward(tensor, ctx, lpe, mask, m, n_max, upstream, g_serial);
      },
      reps);
  row.par_ms = time_ms(
      [&] { par::lpe_adjust_backward(tensor, ctx, lpe, mask, m, n_max, upstream, g_par); },
      reps);
  row.match = bitwise_equal(g_serial.d_tensor, g_par.d_tensor) &&
              bitwise_equal(g_serial.d_ctx, g_par.d_ctx) &&
              bitwise_equal(g_serial.d_lpe, g_par.d_lpe);
  return row;
}

int run(int reps, bool quick) {
  Rng rng(20260814);
  std::vector<Row> rows;
  std::vector<int> sizes = quick ? std::vector<int>{32, 128} : std::vector<int>{32, 64, 128, 256};
  for (const char* which : {"gemm_nn", "gemm_nt", "gemm_tn"})
    for (int n : sizes) rows.push_back(bench_gemm(which, n, reps, rng));
  rows.push_back(bench_lpe_adjust(10, 40, 32, reps, rng, false));
  rows.push_back(bench_lpe_adjust(10, 40, 32, reps, rng, true));
  if (!quick) {
    rows.push_back(bench_lpe_adjust(32, 80, 64, reps, rng, false));
    rows.push_back(bench_lpe_adjust(32, 80, 64, reps, rng, true));
  }

  std::printf("%-16s %-14s %12s %12s %9s %7s\n", "kernel", "shape", "serial_ms", "openmp_ms",
              "speedup", "match");
  bool all_match = true;
  for (const Row& row : rows) {
    double speedup = row.par_ms > 0.0 ? row.serial_ms / row.par_ms : 0.0;
    std::printf("%-16s %-14s %12.4f %12.4f %9.2f %7s\n", row.kernel.c_str(), row.shape.c_str(),
                row.serial_ms, row.par_ms, speedup, row.match ? "yes" : "NO");
    all_match = all_match && row.match;
  }
  if (!all_match) {
    std::fprintf(stderr, "error: serial and OpenMP kernels disagree\n");
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace proso

int main(int argc, char** argv) {
  CLI::App app{"Kernel benchmark: serial reference vs OpenMP"};
  int reps = 5;
  bool quick = false;
  app.add_option("--reps", reps, "Timed repetitions per case")->check(CLI::PositiveNumber);
  app.add_flag("--quick", quick, "Small shapes only, for CI smoke runs");
  CLI11_PARSE(app, argc, argv);
  return proso::run(reps, quick);
}
