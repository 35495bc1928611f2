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

#include <algorithm>
#include <cmath>

#include "proso/core/error.hpp"
#include "proso/core/kernels.hpp"

namespace proso {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tape::Id Tape::push(Matrix value, bool needs_grad, std::function<void(Tape&, Node&)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size()) - 1;
}

Matrix& Tape::grad_of(Id id) {
  Node& n = nodes_[id];
  if (n.grad.data.empty()) n.grad = Matrix::zeros(n.value.rows, n.value.cols);
  return n.grad;
}

Tape::Id Tape::constant(Matrix v) { return push(std::move(v), false, nullptr); }

Tape::Id Tape::param(const Matrix* value, Matrix* grad) {
  return push(*value, true, [value, grad](Tape&, Node& self) {
    if (grad->data.empty()) *grad = Matrix::zeros(value->rows, value->cols);
    require_shape(*grad, value->rows, value->cols, "param grad");
    for (size_t i = 0; i < grad->data.size(); ++i) grad->data[i] += self.grad.data[i];
  });
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.cols != bv.rows)
    throw ValidationError(cat("matmul shape mismatch ", av.rows, "x", av.cols, " * ", bv.rows, "x", bv.cols));
  Matrix out;
  kern::gemm_nn(av, bv, out);
  bool ng = wants(a) || wants(b);
  return push(std::move(out), ng, [a, b](Tape& t, Node& self) {
    if (t.wants(a)) kern::gemm_nt(self.grad, t.value(b), t.grad_of(a), true);
    if (t.wants(b)) kern::gemm_tn(t.value(a), self.grad, t.grad_of(b), true);
  });
}

Tape::Id Tape::add(Id a, Id b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  require_shape(bv, av.rows, av.cols, "add rhs");
  Matrix out = av;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
  bool ng = wants(a) || wants(b);
  return push(std::move(out), ng, [a, b](Tape& t, Node& self) {
    if (t.wants(a)) {
      Matrix& g = t.grad_of(a);
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
    }
    if (t.wants(b)) {
      Matrix& g = t.grad_of(b);
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
    }
  });
}

Tape::Id Tape::sub(Id a, Id b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  require_shape(bv, av.rows, av.cols, "sub rhs");
  Matrix out = av;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv.data[i];
  bool ng = wants(a) || wants(b);
  return push(std::move(out), ng, [a, b](Tape& t, Node& self) {
    if (t.wants(a)) {
      Matrix& g = t.grad_of(a);
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
    }
    if (t.wants(b)) {
      Matrix& g = t.grad_of(b);
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] -= self.grad.data[i];
    }
  });
}

Tape::Id Tape::add_rowvec(Id a, Id row) {
  const Matrix& av = value(a);
  const Matrix& rv = value(row);
  require_shape(rv, 1, av.cols, "add_rowvec row");
  Matrix out = av;
  for (int i = 0; i < out.rows; ++i) {
    double* o = out.row(i);
    for (int j = 0; j < out.cols; ++j) o[j] += rv.data[j];
  }
  bool ng = wants(a) || wants(row);
  return push(std::move(out), ng, [a, row](Tape& t, Node& self) {
    if (t.wants(a)) {
      Matrix& g = t.grad_of(a);
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
    }
    if (t.wants(row)) {
      Matrix& g = t.grad_of(row);
      for (int i = 0; i < self.grad.rows; ++i) {
        const double* sg = self.grad.row(i);
        for (int j = 0; j < self.grad.cols; ++j) g.data[j] += sg[j];
      }
    }
  });
}

Tape::Id Tape::scale(Id a, double s) {
  Matrix out = value(a);
  for (double& v : out.data) v *= s;
  return push(std::move(out), wants(a), [a, s](Tape& t, Node& self) {
    if (!t.wants(a)) return;
    Matrix& g = t.grad_of(a);
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += s * self.grad.data[i];
  });
}

Tape::Id Tape::sigmoid(Id a) {
  Matrix out = value(a);
  for (double& v : out.data) v = stable_sigmoid(v);
  return push(std::move(out), wants(a), [a](Tape& t, Node& self) {
    if (!t.wants(a)) return;
    Matrix& g = t.grad_of(a);
    for (size_t i = 0; i < g.data.size(); ++i) {
      double y = self.value.data[i];
      g.data[i] += self.grad.data[i] * y * (1.0 - y);
    }
  });
}

Tape::Id Tape::tanh(Id a) {
  Matrix out = value(a);
  for (double& v : out.data) v = std::tanh(v);
  return push(std::move(out), wants(a), [a](Tape& t, Node& self) {
    if (!t.wants(a)) return;
    Matrix& g = t.grad_of(a);
    for (size_t i = 0; i < g.data.size(); ++i) {
      double y = self.value.data[i];
      g.data[i] += self.grad.data[i] * (1.0 - y * y);
    }
  });
}

Tape::Id Tape::concat_cols(const std::vector<Id>& xs) {
  if (xs.empty()) throw ValidationError("concat_cols: empty input list");
  int rows = value(xs[0]).rows;
  int cols = 0;
  bool ng = false;
  for (Id x : xs) {
    const Matrix& v = value(x);
    if (v.rows != rows) throw ValidationError("concat_cols: row count mismatch");
    cols += v.cols;
    ng = ng || wants(x);
  }
  Matrix out(rows, cols);
  int off = 0;
  for (Id x : xs) {
    const Matrix& v = value(x);
    for (int i = 0; i < rows; ++i)
      std::copy(v.row(i), v.row(i) + v.cols, out.row(i) + off);
    off += v.cols;
  }
  std::vector<Id> parents = xs;
  return push(std::move(out), ng, [parents](Tape& t, Node& self) {
    int off = 0;
    for (Id x : parents) {
      const Matrix& v = t.value(x);
      if (t.wants(x)) {
        Matrix& g = t.grad_of(x);
        for (int i = 0; i < v.rows; ++i) {
          const double* sg = self.grad.row(i) + off;
          double* gr = g.row(i);
          for (int j = 0; j < v.cols; ++j) gr[j] += sg[j];
        }
      }
      off += v.cols;
    }
  });
}

Tape::Id Tape::slice_rows(Id a, int r0, int r1) {
  const Matrix& av = value(a);
  if (r0 < 0 || r1 > av.rows || r0 >= r1)
    throw ValidationError(cat("slice_rows: bad range [", r0, ",", r1, ") of ", av.rows));
  Matrix out(r1 - r0, av.cols);
  std::copy(av.row(r0), av.row(r0) + static_cast<size_t>(r1 - r0) * av.cols, out.data.data());
  return push(std::move(out), wants(a), [a, r0](Tape& t, Node& self) {
    if (!t.wants(a)) return;
    Matrix& g = t.grad_of(a);
    for (int i = 0; i < self.grad.rows; ++i) {
      const double* sg = self.grad.row(i);
      double* gr = g.row(r0 + i);
      for (int j = 0; j < self.grad.cols; ++j) gr[j] += sg[j];
    }
  });
}

Tape::Id Tape::slice_cols(Id a, int c0, int c1) {
  const Matrix& av = value(a);
  if (c0 < 0 || c1 > av.cols || c0 >= c1)
    throw ValidationError(cat("slice_cols: bad range [", c0, ",", c1, ") of ", av.cols));
  Matrix out(av.rows, c1 - c0);
  for (int i = 0; i < av.rows; ++i)
    std::copy(av.row(i) + c0, av.row(i) + c1, out.row(i));
  return push(std::move(out), wants(a), [a, c0](Tape& t, Node& self) {
    if (!t.wants(a)) return;
    Matrix& g = t.grad_of(a);
    for (int i = 0; i < self.grad.rows; ++i) {
      const double* sg = self.grad.row(i);
      double* gr = g.row(i) + c0;
      for (int j = 0; j < self.grad.cols; ++j) gr[j] += sg[j];
    }
  });
}

Tape::Id Tape::gather_rows(Id table, std::vector<int> ids) {
  const Matrix& tv = value(table);
  Matrix out(static_cast<int>(ids.size()), tv.cols);
  for (size_t i = 0; i < ids.size(); ++i) {
    int r = ids[i];
    if (r < 0 || r >= tv.rows)
      throw ValidationError(cat("gather_rows: index ", r, " out of 0..", tv.rows - 1));
    std::copy(tv.row(r), tv.row(r) + tv.cols, out.row(static_cast<int>(i)));
  }
  return push(std::move(out), wants(table), [table, ids = std::move(ids)](Tape& t, Node& self) {
    if (!t.wants(table)) return;
    Matrix& g = t.grad_of(table);
    for (size_t i = 0; i < ids.size(); ++i) {
      const double* sg = self.grad.row(static_cast<int>(i));
      double* gr = g.row(ids[i]);
      for (int j = 0; j < self.grad.cols; ++j) gr[j] += sg[j];
    }
  });
}

Tape::Id Tape::transpose(Id a) {
  const Matrix& av = value(a);
  Matrix out(av.cols, av.rows);
  for (int i = 0; i < av.rows; ++i)
    for (int j = 0; j < av.cols; ++j) out.at(j, i) = av.at(i, j);
  return push(std::move(out), wants(a), [a](Tape& t, Node& self) {
    if (!t.wants(a)) return;
    Matrix& g = t.grad_of(a);
    for (int i = 0; i < self.grad.rows; ++i)
      for (int j = 0; j < self.grad.cols; ++j) g.at(j, i) += self.grad.at(i, j);
  });
}

Tape::Id Tape::mean_rows(Id a) {
  const Matrix& av = value(a);
  if (av.rows == 0) throw ValidationError("mean_rows: empty matrix");
  Matrix out = Matrix::zeros(1, av.cols);
  for (int i = 0; i < av.rows; ++i) {
    const double* r = av.row(i);
    for (int j = 0; j < av.cols; ++j) out.data[j] += r[j];
  }
  double inv = 1.0 / av.rows;
  for (double& v : out.data) v *= inv;
  return push(std::move(out), wants(a), [a, inv](Tape& t, Node& self) {
    if (!t.wants(a)) return;
    Matrix& g = t.grad_of(a);
    for (int i = 0; i < g.rows; ++i) {
      double* gr = g.row(i);
      for (int j = 0; j < g.cols; ++j) gr[j] += inv * self.grad.data[j];
    }
  });
}

Tape::Id Tape::softmax_flat(Id a) {
  Matrix out = value(a);
  double mx = out.data[0];
  for (double v : out.data) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : out.data) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : out.data) v /= sum;
  return push(std::move(out), wants(a), [a](Tape& t, Node& self) {
    if (!t.wants(a)) return;
    double dot = 0.0;
    for (size_t i = 0; i < self.value.data.size(); ++i)
      dot += self.grad.data[i] * self.value.data[i];
    Matrix& g = t.grad_of(a);
    for (size_t i = 0; i < g.data.size(); ++i)
      g.data[i] += self.value.data[i] * (self.grad.data[i] - dot);
  });
}

Tape::Id Tape::softmax_ce(Id logits, int label) {
  const Matrix& lv = value(logits);
  if (lv.rows != 1) throw ValidationError("softmax_ce: logits must be a row vector");
  if (label < 0 || label >= lv.cols)
    throw ValidationError(cat("softmax_ce: label ", label, " out of 0..", lv.cols - 1));
  double mx = lv.data[0];
  for (double v : lv.data) mx = std::max(mx, v);
  double sum = 0.0;
  std::vector<double> p(lv.data.size());
  for (size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(lv.data[i] - mx);
    sum += p[i];
  }
  double loss = -(lv.data[label] - mx - std::log(sum));
  for (double& v : p) v /= sum;
  Matrix out(1, 1);
  out.data[0] = loss;
  return push(std::move(out), wants(logits), [logits, label, p = std::move(p)](Tape& t, Node& self) {
    if (!t.wants(logits)) return;
    Matrix& g = t.grad_of(logits);
    double up = self.grad.data[0];
    for (size_t i = 0; i < p.size(); ++i)
      g.data[i] += up * (p[i] - (static_cast<int>(i) == label ? 1.0 : 0.0));
  });
}

Tape::Id Tape::masked_sse(Id pred, Matrix target, std::vector<uint8_t> row_mask) {
  const Matrix& pv = value(pred);
  require_shape(target, pv.rows, pv.cols, "masked_sse target");
  if (static_cast<int>(row_mask.size()) != pv.rows)
    throw ValidationError("masked_sse: mask length must equal row count");
  double acc = 0.0;
  for (int i = 0; i < pv.rows; ++i) {
    if (!row_mask[i]) continue;
    const double* p = pv.row(i);
    const double* q = target.row(i);
    for (int j = 0; j < pv.cols; ++j) {
      double d = p[j] - q[j];
      acc += d * d;
    }
  }
  Matrix out(1, 1);
  out.data[0] = acc;
  return push(std::move(out), wants(pred),
              [pred, target = std::move(target), row_mask = std::move(row_mask)](Tape& t, Node& self) {
                if (!t.wants(pred)) return;
                Matrix& g = t.grad_of(pred);
                const Matrix& pv = t.value(pred);
                double up = self.grad.data[0];
                for (int i = 0; i < pv.rows; ++i) {
                  if (!row_mask[i]) continue;
                  const double* p = pv.row(i);
                  const double* q = target.row(i);
                  double* gr = g.row(i);
                  for (int j = 0; j < pv.cols; ++j)
                    gr[j] += up * 2.0 * (p[j] - q[j]);
                }
              });
}

Tape::Id Tape::lstm_seq(Id x, Id wx, Id wh, Id b, bool reverse) {
  const Matrix& xv = value(x);
  const Matrix& wxv = value(wx);
  const Matrix& whv = value(wh);
  const Matrix& bv = value(b);
  int T = xv.rows;
  int h = whv.rows;
  if (wxv.rows != xv.cols || wxv.cols != 4 * h || whv.cols != 4 * h)
    throw ValidationError(cat("lstm_seq: weight shapes do not match (in=", xv.cols, ", h=", h, ")"));
  require_shape(bv, 1, 4 * h, "lstm_seq bias");
  if (T == 0) throw ValidationError("lstm_seq: empty input sequence");

  // Pre-activation input contribution for every step at once.
  Matrix xw;
  kern::gemm_nn(xv, wxv, xw);
  for (int t = 0; t < T; ++t) {
    double* r = xw.row(t);
    for (int j = 0; j < 4 * h; ++j) r[j] += bv.data[j];
  }

  struct Cache {
    Matrix gi, gf, gg, go, c, tc;  // all T x h, indexed by input row
    int h = 0;
    bool reverse = false;
  };
  auto cache = std::make_shared<Cache>();
  cache->gi = Matrix(T, h);
  cache->gf = Matrix(T, h);
  cache->gg = Matrix(T, h);
  cache->go = Matrix(T, h);
  cache->c = Matrix(T, h);
  cache->tc = Matrix(T, h);
  cache->h = h;
  cache->reverse = reverse;

  Matrix out = Matrix::zeros(T, h);
  std::vector<double> z(4 * h);
  std::vector<double> cprev(h, 0.0);
  const double* hprev = nullptr;
  for (int s = 0; s < T; ++s) {
    int r = reverse ? T - 1 - s : s;
    std::copy(xw.row(r), xw.row(r) + 4 * h, z.data());
    if (hprev != nullptr) kern::vec_mat_acc(hprev, whv, z.data());
    double* gi = cache->gi.row(r);
    double* gf = cache->gf.row(r);
    double* gg = cache->gg.row(r);
    double* go = cache->go.row(r);
    double* cc = cache->c.row(r);
    double* tc = cache->tc.row(r);
    double* ho = out.row(r);
    for (int j = 0; j < h; ++j) {
      gi[j] = stable_sigmoid(z[j]);
      gf[j] = stable_sigmoid(z[h + j]);
      gg[j] = std::tanh(z[2 * h + j]);
      go[j] = stable_sigmoid(z[3 * h + j]);
      cc[j] = gf[j] * cprev[j] + gi[j] * gg[j];
      tc[j] = std::tanh(cc[j]);
      ho[j] = go[j] * tc[j];
    }
    std::copy(cc, cc + h, cprev.data());
    hprev = ho;
  }

  bool ng = wants(x) || wants(wx) || wants(wh) || wants(b);
  return push(std::move(out), ng, [x, wx, wh, b, cache](Tape& t, Node& self) {
    const Matrix& xv = t.value(x);
    const Matrix& whv = t.value(wh);
    const Matrix& wxv = t.value(wx);
    int T = xv.rows;
    int h = cache->h;
    bool reverse = cache->reverse;
    bool want_wh = t.wants(wh);

    Matrix dz_all = Matrix::zeros(T, 4 * h);
    std::vector<double> dh(h), dh_carry(h, 0.0), dc_carry(h, 0.0);
    Matrix* dwh = want_wh ? &t.grad_of(wh) : nullptr;

    for (int s = T - 1; s >= 0; --s) {
      int r = reverse ? T - 1 - s : s;
      int rp = reverse ? r + 1 : r - 1;  // input row consumed at step s-1
      const double* gi = cache->gi.row(r);
      const double* gf = cache->gf.row(r);
      const double* gg = cache->gg.row(r);
      const double* go = cache->go.row(r);
      const double* tc = cache->tc.row(r);
      const double* cp = s > 0 ? cache->c.row(rp) : nullptr;
      const double* dout = self.grad.row(r);
      double* dz = dz_all.row(r);
      for (int j = 0; j < h; ++j) {
        double dhj = dout[j] + dh_carry[j];
        double doj = dhj * tc[j];
        double dcj = dc_carry[j] + dhj * go[j] * (1.0 - tc[j] * tc[j]);
        double dij = dcj * gg[j];
        double dgj = dcj * gi[j];
        double dfj = s > 0 ? dcj * cp[j] : 0.0;
        dc_carry[j] = dcj * gf[j];
        dz[j] = dij * gi[j] * (1.0 - gi[j]);
        dz[h + j] = dfj * gf[j] * (1.0 - gf[j]);
        dz[2 * h + j] = dgj * (1.0 - gg[j] * gg[j]);
        dz[3 * h + j] = doj * go[j] * (1.0 - go[j]);
      }
      // dh_carry = dz * wh^T
      for (int j = 0; j < h; ++j) {
        const double* wr = whv.row(j);
        double acc = 0.0;
        for (int k = 0; k < 4 * h; ++k) acc += dz[k] * wr[k];
        dh_carry[j] = acc;
      }
      if (want_wh && s > 0) {
        const double* hp = self.value.row(rp);
        for (int j = 0; j < h; ++j) {
          double hj = hp[j];
          if (hj == 0.0) continue;
          double* dwr = dwh->row(j);
          for (int k = 0; k < 4 * h; ++k) dwr[k] += hj * dz[k];
        }
      }
    }

    if (t.wants(wx)) kern::gemm_tn(xv, dz_all, t.grad_of(wx), true);
    if (t.wants(x)) kern::gemm_nt(dz_all, wxv, t.grad_of(x), true);
    if (t.wants(b)) {
      Matrix& gb = t.grad_of(b);
      for (int i = 0; i < T; ++i) {
        const double* dz = dz_all.row(i);
        for (int j = 0; j < 4 * h; ++j) gb.data[j] += dz[j];
      }
    }
  });
}

Tape::Id Tape::lpe_adjust(Id tensor, Id ctx, Id lpe, int m, int n_max, std::vector<uint8_t> row_mask) {
  const Matrix& tv = value(tensor);
  const Matrix& cv = value(ctx);
  const Matrix& lv = value(lpe);
  Matrix out;
  kern::lpe_adjust(tv, cv, lv, row_mask, m, n_max, out);
  bool ng = wants(tensor) || wants(ctx) || wants(lpe);
  return push(std::move(out), ng,
              [tensor, ctx, lpe, m, n_max, row_mask = std::move(row_mask)](Tape& t, Node& self) {
                LpeAdjustGrads grads;
                kern::lpe_adjust_backward(t.value(tensor), t.value(ctx), t.value(lpe),
                                          row_mask, m, n_max, self.grad, grads);
                if (t.wants(tensor)) {
                  Matrix& g = t.grad_of(tensor);
                  for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += grads.d_tensor.data[i];
                }
                if (t.wants(ctx)) {
                  Matrix& g = t.grad_of(ctx);
                  for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += grads.d_ctx.data[i];
                }
                if (t.wants(lpe)) {
                  Matrix& g = t.grad_of(lpe);
                  for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += grads.d_lpe.data[i];
                }
              });
}

void Tape::backward(const std::vector<std::pair<Id, double>>& seeds) {
  for (const auto& [id, w] : seeds) {
    Node& n = nodes_[id];
    if (n.value.rows != 1 || n.value.cols != 1)
      throw ValidationError("backward: seed nodes must be scalars");
    grad_of(id).data[0] += w;
  }
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.data.empty() || !n.back) continue;
    n.back(*this, n);
  }
}

}  // namespace proso
