// stwb/autograd.hpp

// Copyright 2026  The STWB Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef STWB_AUTOGRAD_HPP_
#define STWB_AUTOGRAD_HPP_

#include <cmath>
#include <functional>
#include <initializer_list>
#include <utility>
#include <vector>

#include "stwb/common.hpp"
#include "stwb/tensor.hpp"

namespace stwb {
namespace ag {

// Reverse-mode tape. A fresh Tape is built per forward pass (dynamic graph);
// backward() walks nodes in reverse creation order, which is a valid
// topological order because ops only consume already-created nodes.
//
// With grad disabled (inference) no backward closures are recorded.

struct Var {
  int i = -1;
  bool valid() const { return i >= 0; }
};

class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var leaf(Tensor value, bool requires_grad = true) {
    return add_node(std::move(value), requires_grad && grad_enabled_);
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var add_node(Tensor value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), Tensor{}, nullptr, requires_grad});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void set_backward(Var v, std::function<void(Tape&)> fn) {
    nodes_[v.i].backward = std::move(fn);
  }

  const Tensor& value(Var v) const { return nodes_[v.i].value; }
  bool requires_grad(Var v) const { return nodes_[v.i].requires_grad; }

  // Gradient of the last backward() target w.r.t. v; empty if none reached v.
  const Tensor& grad(Var v) const { return nodes_[v.i].grad; }

  void accumulate(Var v, const Tensor& delta) {
    Node& n = nodes_[v.i];
    if (!n.requires_grad) return;
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    axpy(1.0, delta, &n.grad);
  }

  Tensor* grad_buffer(Var v) {
    Node& n = nodes_[v.i];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return &n.grad;
  }

  // Seeds d(target)/d(target) = 1 and propagates. target must be 1x1.
  void backward(Var target) {
    require_data(grad_enabled_, "backward on a no-grad tape");
    require_data(value(target).size() == 1, "backward target must be scalar");
    for (auto& n : nodes_) n.grad = Tensor{};
    Node& t = nodes_[target.i];
    t.grad = Tensor(t.value.shape());
    t.grad[0] = 1.0;
    for (int i = target.i; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.backward && !n.grad.empty()) n.backward(*this);
    }
  }

  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

namespace detail {
inline bool want_grad(const Tape& t, std::initializer_list<Var> vs) {
  if (!t.grad_enabled()) return false;
  for (Var v : vs)
    if (t.requires_grad(v)) return true;
  return false;
}
}  // namespace detail

inline Var add(Tape& t, Var a, Var b) {
  require_data(t.value(a).same_shape(t.value(b)), "add shape mismatch");
  Tensor out = t.value(a);
  axpy(1.0, t.value(b), &out);
  bool rg = detail::want_grad(t, {a, b});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, a, b](Tape& tp) {
      tp.accumulate(a, tp.grad(o));
      tp.accumulate(b, tp.grad(o));
    });
  return o;
}

inline Var sub(Tape& t, Var a, Var b) {
  require_data(t.value(a).same_shape(t.value(b)), "sub shape mismatch");
  Tensor out = t.value(a);
  axpy(-1.0, t.value(b), &out);
  bool rg = detail::want_grad(t, {a, b});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, a, b](Tape& tp) {
      tp.accumulate(a, tp.grad(o));
      if (Tensor* gb = tp.grad_buffer(b)) axpy(-1.0, tp.grad(o), gb);
    });
  return o;
}

inline Var mul(Tape& t, Var a, Var b) {
  require_data(t.value(a).same_shape(t.value(b)), "mul shape mismatch");
  Tensor out = t.value(a);
  for (size_t i = 0; i < out.size(); ++i) out[i] *= t.value(b)[i];
  bool rg = detail::want_grad(t, {a, b});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, a, b](Tape& tp) {
      const Tensor& g = tp.grad(o);
      if (Tensor* ga = tp.grad_buffer(a)) {
        const Tensor& bv = tp.value(b);
        for (size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
      }
      if (Tensor* gb = tp.grad_buffer(b)) {
        const Tensor& av = tp.value(a);
        for (size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
      }
    });
  return o;
}

inline Var scale(Tape& t, Var a, double c) {
  Tensor out = t.value(a);
  for (size_t i = 0; i < out.size(); ++i) out[i] *= c;
  bool rg = detail::want_grad(t, {a});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, a, c](Tape& tp) {
      if (Tensor* ga = tp.grad_buffer(a)) axpy(c, tp.grad(o), ga);
    });
  return o;
}

// Adds a 1xN row vector to every row of a TxN matrix (bias add).
inline Var add_rowvec(Tape& t, Var a, Var v) {
  const Tensor& av = t.value(a);
  const Tensor& vv = t.value(v);
  require_data(vv.rows() == 1 && vv.cols() == av.cols(), "add_rowvec shape mismatch");
  Tensor out = av;
  for (int r = 0; r < out.rows(); ++r) {
    double* row = out.row_ptr(r);
    for (int c = 0; c < out.cols(); ++c) row[c] += vv[c];
  }
  bool rg = detail::want_grad(t, {a, v});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, a, v](Tape& tp) {
      const Tensor& g = tp.grad(o);
      tp.accumulate(a, g);
      if (Tensor* gv = tp.grad_buffer(v)) {
        for (int r = 0; r < g.rows(); ++r)
          for (int c = 0; c < g.cols(); ++c) (*gv)[c] += g.at(r, c);
      }
    });
  return o;
}

inline Var matmul(Tape& t, Var a, Var b, bool ta = false, bool tb = false) {
  Tensor out = matmul_raw(t.value(a), t.value(b), ta, tb);
  bool rg = detail::want_grad(t, {a, b});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, a, b, ta, tb](Tape& tp) {
      const Tensor& g = tp.grad(o);
      // d(A B) rules with transposes, derived case by case.
      if (tp.requires_grad(a)) {
        Tensor da = ta ? matmul_raw(tp.value(b), g, tb, true)
                       : matmul_raw(g, tp.value(b), false, !tb);
        if (Tensor* ga = tp.grad_buffer(a)) axpy(1.0, da, ga);
      }
      if (tp.requires_grad(b)) {
        Tensor db = tb ? matmul_raw(g, tp.value(a), true, ta)
                       : matmul_raw(tp.value(a), g, !ta, false);
        if (Tensor* gb = tp.grad_buffer(b)) axpy(1.0, db, gb);
      }
    });
  return o;
}

inline Var relu(Tape& t, Var a) {
  Tensor out = t.value(a);
  for (size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  bool rg = detail::want_grad(t, {a});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, a](Tape& tp) {
      if (Tensor* ga = tp.grad_buffer(a)) {
        const Tensor& g = tp.grad(o);
        const Tensor& x = tp.value(a);
        for (size_t i = 0; i < g.size(); ++i)
          if (x[i] > 0.0) (*ga)[i] += g[i];
      }
    });
  return o;
}

// Row-wise layer normalization with per-column gain and bias (1xN each).
inline Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps = 1e-5) {
  const Tensor& xv = t.value(x);
  const int R = xv.rows(), C = xv.cols();
  require_data(t.value(gain).cols() == C && t.value(bias).cols() == C,
               "layer_norm param shape mismatch");
  Tensor out(R, C);
  Tensor hsave(R, C);     // normalized pre-affine values
  std::vector<double> inv_sigma(R);
  for (int r = 0; r < R; ++r) {
    const double* row = xv.row_ptr(r);
    double mean = 0.0;
    for (int c = 0; c < C; ++c) mean += row[c];
    mean /= C;
    double var = 0.0;
    for (int c = 0; c < C; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= C;
    double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = is;
    for (int c = 0; c < C; ++c) {
      double h = (row[c] - mean) * is;
      hsave.at(r, c) = h;
      out.at(r, c) = h * t.value(gain)[c] + t.value(bias)[c];
    }
  }
  bool rg = detail::want_grad(t, {x, gain, bias});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, x, gain, bias, hsave = std::move(hsave),
                       inv_sigma = std::move(inv_sigma)](Tape& tp) {
      const Tensor& g = tp.grad(o);
      const int R = g.rows(), C = g.cols();
      if (Tensor* gg = tp.grad_buffer(gain)) {
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c) (*gg)[c] += g.at(r, c) * hsave.at(r, c);
      }
      if (Tensor* gb = tp.grad_buffer(bias)) {
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c) (*gb)[c] += g.at(r, c);
      }
      if (Tensor* gx = tp.grad_buffer(x)) {
        const Tensor& gv = tp.value(gain);
        for (int r = 0; r < R; ++r) {
          // dh = dy * gain; dx = (dh - mean(dh) - h * mean(dh*h)) / sigma
          double mean_dh = 0.0, mean_dhh = 0.0;
          for (int c = 0; c < C; ++c) {
            double dh = g.at(r, c) * gv[c];
            mean_dh += dh;
            mean_dhh += dh * hsave.at(r, c);
          }
          mean_dh /= C;
          mean_dhh /= C;
          for (int c = 0; c < C; ++c) {
            double dh = g.at(r, c) * gv[c];
            gx->at(r, c) +=
                (dh - mean_dh - hsave.at(r, c) * mean_dhh) * inv_sigma[r];
          }
        }
      }
    });
  return o;
}

inline Var softmax_rows(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.rows(), xv.cols());
  for (int r = 0; r < xv.rows(); ++r) {
    const double* row = xv.row_ptr(r);
    double mx = kNegInf;
    for (int c = 0; c < xv.cols(); ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (int c = 0; c < xv.cols(); ++c) z += std::exp(row[c] - mx);
    for (int c = 0; c < xv.cols(); ++c) out.at(r, c) = std::exp(row[c] - mx) / z;
  }
  bool rg = detail::want_grad(t, {x});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, x](Tape& tp) {
      if (Tensor* gx = tp.grad_buffer(x)) {
        const Tensor& y = tp.value(o);
        const Tensor& g = tp.grad(o);
        for (int r = 0; r < y.rows(); ++r) {
          double dot = 0.0;
          for (int c = 0; c < y.cols(); ++c) dot += g.at(r, c) * y.at(r, c);
          for (int c = 0; c < y.cols(); ++c)
            gx->at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
        }
      }
    });
  return o;
}

inline Var log_softmax_rows(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.rows(), xv.cols());
  for (int r = 0; r < xv.rows(); ++r) {
    const double* row = xv.row_ptr(r);
    double mx = kNegInf;
    for (int c = 0; c < xv.cols(); ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (int c = 0; c < xv.cols(); ++c) z += std::exp(row[c] - mx);
    double lz = mx + std::log(z);
    for (int c = 0; c < xv.cols(); ++c) out.at(r, c) = row[c] - lz;
  }
  bool rg = detail::want_grad(t, {x});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, x](Tape& tp) {
      if (Tensor* gx = tp.grad_buffer(x)) {
        const Tensor& y = tp.value(o);  // log-probs
        const Tensor& g = tp.grad(o);
        for (int r = 0; r < y.rows(); ++r) {
          double gsum = 0.0;
          for (int c = 0; c < y.cols(); ++c) gsum += g.at(r, c);
          for (int c = 0; c < y.cols(); ++c)
            gx->at(r, c) += g.at(r, c) - std::exp(y.at(r, c)) * gsum;
        }
      }
    });
  return o;
}

// Gathers rows of an embedding table: out[r] = table[ids[r]].
inline Var embed_rows(Tape& t, Var table, const std::vector<int>& ids) {
  const Tensor& w = t.value(table);
  Tensor out(static_cast<int>(ids.size()), w.cols());
  for (size_t r = 0; r < ids.size(); ++r) {
    require_data(ids[r] >= 0 && ids[r] < w.rows(), "embedding id out of range");
    for (int c = 0; c < w.cols(); ++c) out.at(static_cast<int>(r), c) = w.at(ids[r], c);
  }
  bool rg = detail::want_grad(t, {table});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, table, ids](Tape& tp) {
      if (Tensor* gw = tp.grad_buffer(table)) {
        const Tensor& g = tp.grad(o);
        for (size_t r = 0; r < ids.size(); ++r)
          for (int c = 0; c < g.cols(); ++c)
            gw->at(ids[r], c) += g.at(static_cast<int>(r), c);
      }
    });
  return o;
}

inline Var slice_cols(Tape& t, Var x, int c0, int n) {
  const Tensor& xv = t.value(x);
  require_data(c0 >= 0 && c0 + n <= xv.cols(), "slice_cols out of range");
  Tensor out(xv.rows(), n);
  for (int r = 0; r < xv.rows(); ++r)
    for (int c = 0; c < n; ++c) out.at(r, c) = xv.at(r, c0 + c);
  bool rg = detail::want_grad(t, {x});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, x, c0, n](Tape& tp) {
      if (Tensor* gx = tp.grad_buffer(x)) {
        const Tensor& g = tp.grad(o);
        for (int r = 0; r < g.rows(); ++r)
          for (int c = 0; c < n; ++c) gx->at(r, c0 + c) += g.at(r, c);
      }
    });
  return o;
}

inline Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  require_data(!parts.empty(), "concat_cols of nothing");
  int rows = t.value(parts[0]).rows();
  int cols = 0;
  for (Var p : parts) {
    require_data(t.value(p).rows() == rows, "concat_cols row mismatch");
    cols += t.value(p).cols();
  }
  Tensor out(rows, cols);
  int off = 0;
  for (Var p : parts) {
    const Tensor& pv = t.value(p);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < pv.cols(); ++c) out.at(r, off + c) = pv.at(r, c);
    off += pv.cols();
  }
  bool rg = false;
  for (Var p : parts) rg = rg || detail::want_grad(t, {p});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, parts](Tape& tp) {
      const Tensor& g = tp.grad(o);
      int off = 0;
      for (Var p : parts) {
        const int pc = tp.value(p).cols();
        if (Tensor* gp = tp.grad_buffer(p)) {
          for (int r = 0; r < g.rows(); ++r)
            for (int c = 0; c < pc; ++c) gp->at(r, c) += g.at(r, off + c);
        }
        off += pc;
      }
    });
  return o;
}

// Valid 1-D convolution over time. x: T x Fin, w: (k*Fin) x Cout, b: 1 x Cout.
// Output row t' is w applied to the flattened window x[t'*stride .. +k).
inline Var conv1d(Tape& t, Var x, Var w, Var b, int k, int stride) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  const int T = xv.rows(), Fin = xv.cols();
  require_data(wv.rows() == k * Fin, "conv1d weight shape mismatch");
  require_data(T >= k, "conv1d input shorter than kernel");
  const int Cout = wv.cols();
  const int To = (T - k) / stride + 1;
  Tensor out(To, Cout);
  for (int to = 0; to < To; ++to) {
    const int t0 = to * stride;
    for (int j = 0; j < Cout; ++j) {
      double acc = t.value(b)[j];
      for (int dt = 0; dt < k; ++dt) {
        const double* xr = xv.row_ptr(t0 + dt);
        for (int f = 0; f < Fin; ++f) acc += xr[f] * wv.at(dt * Fin + f, j);
      }
      out.at(to, j) = acc;
    }
  }
  bool rg = detail::want_grad(t, {x, w, b});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, x, w, b, k, stride](Tape& tp) {
      const Tensor& g = tp.grad(o);
      const Tensor& xv = tp.value(x);
      const Tensor& wv = tp.value(w);
      const int Fin = xv.cols(), Cout = wv.cols(), To = g.rows();
      if (Tensor* gb = tp.grad_buffer(b)) {
        for (int to = 0; to < To; ++to)
          for (int j = 0; j < Cout; ++j) (*gb)[j] += g.at(to, j);
      }
      Tensor* gw = tp.grad_buffer(w);
      Tensor* gx = tp.grad_buffer(x);
      for (int to = 0; to < To; ++to) {
        const int t0 = to * stride;
        for (int j = 0; j < Cout; ++j) {
          const double gj = g.at(to, j);
          if (gj == 0.0) continue;
          for (int dt = 0; dt < k; ++dt) {
            const double* xr = xv.row_ptr(t0 + dt);
            for (int f = 0; f < Fin; ++f) {
              if (gw) gw->at(dt * Fin + f, j) += gj * xr[f];
              if (gx) gx->at(t0 + dt, f) += gj * wv.at(dt * Fin + f, j);
            }
          }
        }
      }
    });
  return o;
}

// Depthwise 1-D convolution, SAME padding, stride 1. x: T x C, w: k x C,
// b: 1 x C. Channel c is filtered independently by column c of w.
inline Var depthwise_conv1d(Tape& t, Var x, Var w, Var b, int k) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  const int T = xv.rows(), C = xv.cols();
  require_data(wv.rows() == k && wv.cols() == C, "depthwise weight shape mismatch");
  const int pad = (k - 1) / 2;
  Tensor out(T, C);
  for (int to = 0; to < T; ++to) {
    for (int c = 0; c < C; ++c) {
      double acc = t.value(b)[c];
      for (int dt = 0; dt < k; ++dt) {
        int ti = to + dt - pad;
        if (ti < 0 || ti >= T) continue;
        acc += xv.at(ti, c) * wv.at(dt, c);
      }
      out.at(to, c) = acc;
    }
  }
  bool rg = detail::want_grad(t, {x, w, b});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, x, w, b, k](Tape& tp) {
      const Tensor& g = tp.grad(o);
      const Tensor& xv = tp.value(x);
      const Tensor& wv = tp.value(w);
      const int T = xv.rows(), C = xv.cols(), pad = (k - 1) / 2;
      if (Tensor* gb = tp.grad_buffer(b)) {
        for (int to = 0; to < T; ++to)
          for (int c = 0; c < C; ++c) (*gb)[c] += g.at(to, c);
      }
      Tensor* gw = tp.grad_buffer(w);
      Tensor* gx = tp.grad_buffer(x);
      for (int to = 0; to < T; ++to) {
        for (int c = 0; c < C; ++c) {
          const double gj = g.at(to, c);
          if (gj == 0.0) continue;
          for (int dt = 0; dt < k; ++dt) {
            int ti = to + dt - pad;
            if (ti < 0 || ti >= T) continue;
            if (gw) gw->at(dt, c) += gj * xv.at(ti, c);
            if (gx) gx->at(ti, c) += gj * wv.at(dt, c);
          }
        }
      }
    });
  return o;
}

inline Var sum_all(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  Tensor out(1, 1);
  for (size_t i = 0; i < xv.size(); ++i) out[0] += xv[i];
  bool rg = detail::want_grad(t, {x});
  Var o = t.add_node(std::move(out), rg);
  if (rg)
    t.set_backward(o, [o, x](Tape& tp) {
      if (Tensor* gx = tp.grad_buffer(x)) {
        const double g = tp.grad(o)[0];
        for (size_t i = 0; i < gx->size(); ++i) (*gx)[i] += g;
      }
    });
  return o;
}

inline Var mean_all(Tape& t, Var x) {
  return scale(t, sum_all(t, x), 1.0 / static_cast<double>(t.value(x).size()));
}

}  // namespace ag
}  // namespace stwb

#endif  // STWB_AUTOGRAD_HPP_
