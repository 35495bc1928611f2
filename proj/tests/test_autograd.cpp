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

#include "proso/core/tape.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "proso/core/rng.hpp"
#include "testutil.hpp"

namespace proso {
namespace {

using testutil::fd_check;
using testutil::random_matrix;

constexpr double kFdTol = 1e-5;

// Reduces any node to a scalar through a fixed quadratic so that every
// element of the op output influences the objective.
Tape::Id to_scalar(Tape& t, Tape::Id y, Rng& rng) {
  const Matrix& v = t.value(y);
  Matrix target = random_matrix(rng, v.rows, v.cols);
  std::vector<uint8_t> mask(v.rows, 1);
  return t.masked_sse(y, std::move(target), std::move(mask));
}

TEST_CASE("matmul gradient") {
  Rng rng(1);
  auto rep = fd_check({random_matrix(rng, 3, 4), random_matrix(rng, 4, 5)},
                      [&](Tape& t, const std::vector<Tape::Id>& in) {
                        Rng r2(11);
                        return to_scalar(t, t.matmul(in[0], in[1]), r2);
                      });
  CHECK(rep.max_rel_err < kFdTol);
}

TEST_CASE("add, sub and scale gradients") {
  Rng rng(2);
  auto rep = fd_check({random_matrix(rng, 3, 3), random_matrix(rng, 3, 3)},
                      [&](Tape& t, const std::vector<Tape::Id>& in) {
                        Rng r2(12);
                        Tape::Id s = t.add(in[0], t.scale(in[1], -2.5));
                        return to_scalar(t, t.sub(s, in[1]), r2);
                      });
  CHECK(rep.max_rel_err < kFdTol);
}

TEST_CASE("add_rowvec gradient") {
  Rng rng(3);
  auto rep = fd_check({random_matrix(rng, 4, 3), random_matrix(rng, 1, 3)},
                      [&](Tape& t, const std::vector<Tape::Id>& in) {
                        Rng r2(13);
                        return to_scalar(t, t.add_rowvec(in[0], in[1]), r2);
                      });
  CHECK(rep.max_rel_err < kFdTol);
}

TEST_CASE("sigmoid and tanh gradients") {
  Rng rng(4);
  auto rep = fd_check({random_matrix(rng, 3, 4, -2.0, 2.0)},
                      [&](Tape& t, const std::vector<Tape::Id>& in) {
                        Rng r2(14);
                        return to_scalar(t, t.tanh(t.sigmoid(in[0])), r2);
                      });
  CHECK(rep.max_rel_err < kFdTol);
}

TEST_CASE("concat and slice gradients") {
  Rng rng(5);
  auto rep = fd_check({random_matrix(rng, 4, 2), random_matrix(rng, 4, 3)},
                      [&](Tape& t, const std::vector<Tape::Id>& in) {
                        Rng r2(15);
                        Tape::Id c = t.concat_cols({in[0], in[1], in[0]});
                        Tape::Id rs = t.slice_rows(c, 1, 4);
                        Tape::Id cs = t.slice_cols(rs, 1, 6);
                        return to_scalar(t, cs, r2);
                      });
  CHECK(rep.max_rel_err < kFdTol);
}

TEST_CASE("gather_rows gradient with repeated indices") {
  Rng rng(6);
  auto rep = fd_check({random_matrix(rng, 5, 3)},
                      [&](Tape& t, const std::vector<Tape::Id>& in) {
                        Rng r2(16);
                        Tape::Id g = t.gather_rows(in[0], {0, 2, 2, 4, 0});
                        return to_scalar(t, g, r2);
                      });
  CHECK(rep.max_rel_err < kFdTol);
}

TEST_CASE("transpose and mean_rows gradients") {
  Rng rng(7);
  auto rep = fd_check({random_matrix(rng, 4, 3)},
                      [&](Tape& t, const std::vector<Tape::Id>& in) {
                        Rng r2(17);
                        return to_scalar(t, t.mean_rows(t.transpose(in[0])), r2);
                      });
  CHECK(rep.max_rel_err < kFdTol);
}

TEST_CASE("softmax_flat gradient") {
  Rng rng(8);
  auto rep = fd_check({random_matrix(rng, 3, 1, -2.0, 2.0)},
                      [&](Tape& t, const std::vector<Tape::Id>& in) {
                        Rng r2(18);
                        return to_scalar(t, t.softmax_flat(in[0]), r2);
                      });
  CHECK(rep.max_rel_err < kFdTol);
}

TEST_CASE("softmax_ce gradient and value") {
  Rng rng(9);
  Matrix logits = random_matrix(rng, 1, 4, -2.0, 2.0);
  {
    Tape t;
    Tape::Id id = t.constant(logits);
    Tape::Id loss = t.softmax_ce(id, 2);
    double mx = *std::max_element(logits.data.begin(), logits.data.end());
    double z = 0.0;
    for (double v : logits.data) z += std::exp(v - mx);
    double expect = -(logits.data[2] - mx - std::log(z));
    CHECK(std::fabs(t.scalar(loss) - expect) < 1e-12);
  }
  auto rep = fd_check({logits}, [&](Tape& t, const std::vector<Tape::Id>& in) {
    return t.softmax_ce(in[0], 2);
  });
  CHECK(rep.max_rel_err < kFdTol);
}

TEST_CASE("masked_sse gradient skips masked rows") {
  Rng rng(10);
  Matrix pred = random_matrix(rng, 4, 2);
  Matrix target = random_matrix(rng, 4, 2);
  std::vector<uint8_t> mask{1, 0, 1, 0};
  auto rep = fd_check({pred}, [&](Tape& t, const std::vector<Tape::Id>& in) {
    return t.masked_sse(in[0], target, mask);
  });
  CHECK(rep.max_rel_err < kFdTol);

  Tape t;
  Matrix grad;
  Tape::Id p = t.param(&pred, &grad);
  Tape::Id loss = t.masked_sse(p, target, mask);
  t.backward({{loss, 1.0}});
  for (int j = 0; j < 2; ++j) {
    CHECK(grad.at(1, j) == 0.0);
    CHECK(grad.at(3, j) == 0.0);
  }
}

TEST_CASE("lstm_seq gradient, forward direction") {
  Rng rng(20);
  int T = 5, in_dim = 3, h = 4;
  auto rep = fd_check({random_matrix(rng, T, in_dim), random_matrix(rng, in_dim, 4 * h, -0.5, 0.5),
                       random_matrix(rng, h, 4 * h, -0.5, 0.5), random_matrix(rng, 1, 4 * h, -0.2, 0.2)},
                      [&](Tape& t, const std::vector<Tape::Id>& in) {
                        Rng r2(21);
                        return to_scalar(t, t.lstm_seq(in[0], in[1], in[2], in[3], false), r2);
                      });
  CHECK(rep.max_rel_err < kFdTol);
}

TEST_CASE("lstm_seq gradient, reverse direction") {
  Rng rng(22);
  int T = 6, in_dim = 2, h = 3;
  auto rep = fd_check({random_matrix(rng, T, in_dim), random_matrix(rng, in_dim, 4 * h, -0.5, 0.5),
                       random_matrix(rng, h, 4 * h, -0.5, 0.5), random_matrix(rng, 1, 4 * h, -0.2, 0.2)},
                      [&](Tape& t, const std::vector<Tape::Id>& in) {
                        Rng r2(23);
                        return to_scalar(t, t.lstm_seq(in[0], in[1], in[2], in[3], true), r2);
                      });
  CHECK(rep.max_rel_err < kFdTol);
}

TEST_CASE("lstm_seq reverse equals forward on the reversed sequence") {
  Rng rng(24);
  int T = 7, in_dim = 3, h = 2;
  Matrix x = random_matrix(rng, T, in_dim);
  Matrix wx = random_matrix(rng, in_dim, 4 * h);
  Matrix wh = random_matrix(rng, h, 4 * h);
  Matrix b = random_matrix(rng, 1, 4 * h);
  Matrix xr(T, in_dim);
  for (int i = 0; i < T; ++i)
    std::copy(x.row(T - 1 - i), x.row(T - 1 - i) + in_dim, xr.row(i));

  Tape t;
  Tape::Id rev = t.lstm_seq(t.constant(x), t.constant(wx), t.constant(wh), t.constant(b), true);
  Tape::Id fwd = t.lstm_seq(t.constant(xr), t.constant(wx), t.constant(wh), t.constant(b), false);
  const Matrix& rv = t.value(rev);
  const Matrix& fv = t.value(fwd);
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < h; ++j) CHECK(rv.at(i, j) == fv.at(T - 1 - i, j));
}

TEST_CASE("lpe_adjust gradient through the tape") {
  Rng rng(25);
  int m = 2, n_max = 4, rank = 3;
  std::vector<uint8_t> mask(static_cast<size_t>(m) * n_max, 1);
  mask[1] = 0;
  mask[6] = 0;
  auto rep = fd_check({random_matrix(rng, rank, 9), random_matrix(rng, m, rank),
                       random_matrix(rng, m * n_max, 3)},
                      [&](Tape& t, const std::vector<Tape::Id>& in) {
                        Rng r2(26);
                        Tape::Id d = t.lpe_adjust(in[0], in[1], in[2], m, n_max, mask);
                        return to_scalar(t, d, r2);
                      });
  CHECK(rep.max_rel_err < kFdTol);
}

TEST_CASE("backward with multiple weighted seeds is linear") {
  Rng rng(27);
  Matrix x = random_matrix(rng, 2, 2);
  Matrix target1 = random_matrix(rng, 2, 2);
  Matrix target2 = random_matrix(rng, 2, 2);
  std::vector<uint8_t> mask{1, 1};

  auto run = [&](double w1, double w2) {
    Tape t;
    Matrix grad;
    Tape::Id p = t.param(&x, &grad);
    Tape::Id l1 = t.masked_sse(p, target1, mask);
    Tape::Id l2 = t.masked_sse(t.sigmoid(p), target2, mask);
    t.backward({{l1, w1}, {l2, w2}});
    return grad;
  };

  Matrix g10 = run(1.0, 0.0);
  Matrix g01 = run(0.0, 1.0);
  Matrix gw = run(0.25, 2.0);
  for (size_t i = 0; i < gw.data.size(); ++i)
    CHECK(std::fabs(gw.data[i] - (0.25 * g10.data[i] + 2.0 * g01.data[i])) < 1e-12);
}

TEST_CASE("a node consumed twice accumulates both paths") {
  Matrix x = Matrix::full(1, 1, 0.7);
  Matrix grad;
  Tape t;
  Tape::Id p = t.param(&x, &grad);
  Tape::Id y = t.add(p, p);
  Tape::Id loss = t.masked_sse(y, Matrix::zeros(1, 1), {1});
  t.backward({{loss, 1.0}});
  // d/dx (2x)^2 = 8x
  CHECK(std::fabs(grad.data[0] - 8.0 * 0.7) < 1e-12);
}

TEST_CASE("param gradients accumulate across tapes") {
  Matrix x = Matrix::full(1, 1, 0.5);
  Matrix grad;
  for (int it = 0; it < 2; ++it) {
    Tape t;
    Tape::Id p = t.param(&x, &grad);
    Tape::Id loss = t.masked_sse(p, Matrix::zeros(1, 1), {1});
    t.backward({{loss, 1.0}});
  }
  CHECK(std::fabs(grad.data[0] - 2.0) < 1e-12);
}

}  // namespace
}  // namespace proso
