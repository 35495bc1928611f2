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

#ifndef PROSO_CORE_MATRIX_HPP_
#define PROSO_CORE_MATRIX_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "proso/core/error.hpp"

namespace proso {

// Dense row-major matrix of doubles. Vectors are 1xC or Rx1 matrices.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  static Matrix zeros(int r, int c) { return Matrix(r, c); }
  static Matrix full(int r, int c, double v) {
    Matrix m(r, c);
    m.fill(v);
    return m;
  }

  double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }

  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(0.0); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
  }
};

inline void require_shape(const Matrix& m, int rows, int cols, const char* what) {
  if (m.rows != rows || m.cols != cols) {
    throw ValidationError(cat(what, ": expected ", rows, "x", cols, ", got ", m.rows, "x",
                              m.cols));
  }
}

}  // namespace proso

#endif  // PROSO_CORE_MATRIX_HPP_
