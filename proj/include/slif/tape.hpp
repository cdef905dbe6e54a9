#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "slif/errors.hpp"
#include "slif/sparse_graph.hpp"
#include "slif/tensor.hpp"

namespace slif {

// Reverse-mode tape over dense tensors. Nodes are appended in topological
// order; backward() replays them in reverse, accumulating gradients
// additively across fan-out. Graph structures referenced by spmm must
// outlive the tape.
//
// Scalar reductions and inner products accumulate in double regardless of T,
// so row-parallel kernels stay bit-deterministic and reordering-insensitive
// down to the final rounding.
template <typename T>
class TapeT {
 public:
  using Id = int32_t;
  using Tn = TensorT<T>;

  // ---- node construction ----

  Id param(Tn value) { return push("param", std::move(value), {}, nullptr, true); }

  Id constant(Tn value) { return push("constant", std::move(value), {}, nullptr, false); }

  Id zeros(std::vector<int64_t> shape) { return constant(Tn(std::move(shape))); }

  // Identical value, but gradients stop here: backward contributes nothing
  // to the source or its ancestors. Under a replay buffer (difference
  // probes), the recorded baseline value is substituted so the evaluated
  // function is exactly the one the tape differentiates - detached buffers
  // are constants under differentiation.
  Id detach(Id x) {
    Tn v = value(x);
    if (detach_replay_) {
      if (detach_replay_pos_ >= detach_replay_->size())
        throw ShapeError("detach replay: program built more detach nodes than recorded");
      v = (*detach_replay_)[detach_replay_pos_++];
      if (!v.same_shape(value(x))) throw ShapeError("detach replay: shape drift");
    } else if (detach_record_) {
      detach_record_->push_back(v);
    }
    return push("detach", std::move(v), {}, nullptr, false);
  }

  // Difference-probe hooks: record captures every detach output in build
  // order; replay substitutes a recorded sequence.
  void record_detach_outputs(std::vector<Tn>* sink) {
    detach_record_ = sink;
    detach_replay_ = nullptr;
  }
  void replay_detach_outputs(const std::vector<Tn>* src) {
    detach_replay_ = src;
    detach_replay_pos_ = 0;
    detach_record_ = nullptr;
  }

  // ---- elementwise / linear ----

  Id add(Id a, Id b) {
    check_same_shape("add", a, b);
    Tn out = value(a);
    const Tn& vb = value(b);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += vb[i];
    return push("add", std::move(out), {a, b}, [a, b](TapeT& tp, Id y) {
      tp.axpy(a, T(1), tp.grad_of(y));
      tp.axpy(b, T(1), tp.grad_of(y));
    });
  }

  Id sub(Id a, Id b) {
    check_same_shape("sub", a, b);
    Tn out = value(a);
    const Tn& vb = value(b);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] -= vb[i];
    return push("sub", std::move(out), {a, b}, [a, b](TapeT& tp, Id y) {
      tp.axpy(a, T(1), tp.grad_of(y));
      tp.axpy(b, T(-1), tp.grad_of(y));
    });
  }

  Id mul(Id a, Id b) {
    check_same_shape("mul", a, b);
    Tn out = value(a);
    const Tn& vb = value(b);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= vb[i];
    return push("mul", std::move(out), {a, b}, [a, b](TapeT& tp, Id y) {
      const Tn& g = tp.grad_of(y);
      if (tp.needs_grad(a)) {
        Tn& ga = tp.grad_mut(a);
        const Tn& vb2 = tp.value(b);
        for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb2[i];
      }
      if (tp.needs_grad(b)) {
        Tn& gb = tp.grad_mut(b);
        const Tn& va2 = tp.value(a);
        for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * va2[i];
      }
    });
  }

  Id scale(Id a, double c) {
    Tn out = value(a);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(out[i] * c);
    return push("scale", std::move(out), {a},
                [a, c](TapeT& tp, Id y) { tp.axpy(a, static_cast<T>(c), tp.grad_of(y)); });
  }

  // y = s * a for a one-element node s (learnable coefficient).
  Id mul_scalar(Id a, Id s) {
    if (value(s).numel() != 1) throw ShapeError("mul_scalar: coefficient must have one element");
    const T sv = value(s)[0];
    Tn out = value(a);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= sv;
    return push("mul_scalar", std::move(out), {a, s}, [a, s](TapeT& tp, Id y) {
      const Tn& g = tp.grad_of(y);
      if (tp.needs_grad(a)) tp.axpy(a, tp.value(s)[0], g);
      if (tp.needs_grad(s)) {
        const Tn& va = tp.value(a);
        double acc = 0.0;
        for (int64_t i = 0; i < g.numel(); ++i)
          acc += static_cast<double>(g[i]) * static_cast<double>(va[i]);
        tp.grad_mut(s)[0] += static_cast<T>(acc);
      }
    });
  }

  // ---- matrix products ----

  Id matmul(Id a, Id b) {
    const Tn& va = value(a);
    const Tn& vb = value(b);
    if (va.cols() != vb.rows())
      throw ShapeError("matmul: " + va.shape_str() + " x " + vb.shape_str());
    const int64_t m = va.rows(), k = va.cols(), n = vb.cols();
    Tn out({m, n});
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int64_t p = 0; p < k; ++p)
          acc += static_cast<double>(va.at(i, p)) * static_cast<double>(vb.at(p, j));
        out.at(i, j) = static_cast<T>(acc);
      }
    return push("matmul", std::move(out), {a, b}, [a, b, m, k, n](TapeT& tp, Id y) {
      const Tn& g = tp.grad_of(y);
      if (tp.needs_grad(a)) {  // dA += g B^T
        Tn& ga = tp.grad_mut(a);
        const Tn& vb2 = tp.value(b);
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < m; ++i)
          for (int64_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int64_t j = 0; j < n; ++j)
              acc += static_cast<double>(g.at(i, j)) * static_cast<double>(vb2.at(p, j));
            ga.at(i, p) += static_cast<T>(acc);
          }
      }
      if (tp.needs_grad(b)) {  // dB += A^T g
        Tn& gb = tp.grad_mut(b);
        const Tn& va2 = tp.value(a);
#pragma omp parallel for schedule(static)
        for (int64_t p = 0; p < k; ++p)
          for (int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int64_t i = 0; i < m; ++i)
              acc += static_cast<double>(va2.at(i, p)) * static_cast<double>(g.at(i, j));
            gb.at(p, j) += static_cast<T>(acc);
          }
      }
    });
  }

  // y = a b^T, with a: m x k, b: n x k.
  Id matmul_nt(Id a, Id b) {
    const Tn& va = value(a);
    const Tn& vb = value(b);
    if (va.cols() != vb.cols())
      throw ShapeError("matmul_nt: " + va.shape_str() + " x " + vb.shape_str() + "^T");
    const int64_t m = va.rows(), k = va.cols(), n = vb.rows();
    Tn out({m, n});
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int64_t p = 0; p < k; ++p)
          acc += static_cast<double>(va.at(i, p)) * static_cast<double>(vb.at(j, p));
        out.at(i, j) = static_cast<T>(acc);
      }
    return push("matmul_nt", std::move(out), {a, b}, [a, b, m, k, n](TapeT& tp, Id y) {
      const Tn& g = tp.grad_of(y);
      if (tp.needs_grad(a)) {  // dA += g B
        Tn& ga = tp.grad_mut(a);
        const Tn& vb2 = tp.value(b);
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < m; ++i)
          for (int64_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int64_t j = 0; j < n; ++j)
              acc += static_cast<double>(g.at(i, j)) * static_cast<double>(vb2.at(j, p));
            ga.at(i, p) += static_cast<T>(acc);
          }
      }
      if (tp.needs_grad(b)) {  // dB += g^T A
        Tn& gb = tp.grad_mut(b);
        const Tn& va2 = tp.value(a);
#pragma omp parallel for schedule(static)
        for (int64_t j = 0; j < n; ++j)
          for (int64_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int64_t i = 0; i < m; ++i)
              acc += static_cast<double>(g.at(i, j)) * static_cast<double>(va2.at(i, p));
            gb.at(j, p) += static_cast<T>(acc);
          }
      }
    });
  }

  // y = G x with a constant sparse graph. `gt` is G^T for the backward pass;
  // pass the same pointer when G is symmetric. Both must outlive the tape.
  Id spmm(const SparseGraph* g, const SparseGraph* gt, Id x) {
    Tn out = g->multiply(value(x));
    return push("spmm", std::move(out), {x}, [x, gt](TapeT& tp, Id y) {
      if (!tp.needs_grad(x)) return;
      Tn gx = gt->multiply(tp.grad_of(y));
      tp.axpy(x, T(1), gx);
    });
  }

  // ---- shape ops ----

  Id gather_rows(Id x, std::vector<int32_t> ids) {
    const Tn& vx = value(x);
    const int64_t d = vx.cols();
    Tn out({static_cast<int64_t>(ids.size()), d});
    for (size_t e = 0; e < ids.size(); ++e) {
      if (ids[e] < 0 || ids[e] >= vx.rows()) throw ShapeError("gather_rows: index out of range");
      std::copy_n(vx.ptr() + ids[e] * d, d, out.ptr() + static_cast<int64_t>(e) * d);
    }
    return push("gather_rows", std::move(out), {x},
                [x, ids = std::move(ids), d](TapeT& tp, Id y) {
                  if (!tp.needs_grad(x)) return;
                  const Tn& g = tp.grad_of(y);
                  Tn& gx = tp.grad_mut(x);
                  for (size_t e = 0; e < ids.size(); ++e)
                    for (int64_t c = 0; c < d; ++c)
                      gx.at(ids[e], c) += g.at(static_cast<int64_t>(e), c);
                });
  }

  Id slice_rows(Id x, int64_t r0, int64_t r1) {
    const Tn& vx = value(x);
    if (r0 < 0 || r1 > vx.rows() || r0 > r1) throw ShapeError("slice_rows: bad range");
    const int64_t d = vx.cols();
    Tn out({r1 - r0, d});
    std::copy_n(vx.ptr() + r0 * d, (r1 - r0) * d, out.ptr());
    return push("slice_rows", std::move(out), {x}, [x, r0, r1, d](TapeT& tp, Id y) {
      if (!tp.needs_grad(x)) return;
      const Tn& g = tp.grad_of(y);
      Tn& gx = tp.grad_mut(x);
      for (int64_t i = 0; i < r1 - r0; ++i)
        for (int64_t c = 0; c < d; ++c) gx.at(r0 + i, c) += g.at(i, c);
    });
  }

  Id concat_rows(Id a, Id b) {
    const Tn& va = value(a);
    const Tn& vb = value(b);
    if (va.cols() != vb.cols()) throw ShapeError("concat_rows: column mismatch");
    Tn out({va.rows() + vb.rows(), va.cols()});
    std::copy_n(va.ptr(), va.numel(), out.ptr());
    std::copy_n(vb.ptr(), vb.numel(), out.ptr() + va.numel());
    const int64_t ra = va.rows(), d = va.cols();
    return push("concat_rows", std::move(out), {a, b}, [a, b, ra, d](TapeT& tp, Id y) {
      const Tn& g = tp.grad_of(y);
      if (tp.needs_grad(a)) {
        Tn& ga = tp.grad_mut(a);
        for (int64_t i = 0; i < ra; ++i)
          for (int64_t c = 0; c < d; ++c) ga.at(i, c) += g.at(i, c);
      }
      if (tp.needs_grad(b)) {
        Tn& gb = tp.grad_mut(b);
        for (int64_t i = 0; i < g.rows() - ra; ++i)
          for (int64_t c = 0; c < d; ++c) gb.at(i, c) += g.at(ra + i, c);
      }
    });
  }

  Id concat_cols(const std::vector<Id>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: empty");
    int64_t rows = value(parts[0]).rows(), cols = 0;
    for (Id p : parts) {
      if (value(p).rows() != rows) throw ShapeError("concat_cols: row mismatch");
      cols += value(p).cols();
    }
    Tn out({rows, cols});
    int64_t off = 0;
    for (Id p : parts) {
      const Tn& vp = value(p);
      for (int64_t i = 0; i < rows; ++i)
        std::copy_n(vp.ptr() + i * vp.cols(), vp.cols(), out.ptr() + i * cols + off);
      off += vp.cols();
    }
    return push("concat_cols", std::move(out), parts, [parts, rows, cols](TapeT& tp, Id y) {
      const Tn& g = tp.grad_of(y);
      int64_t off2 = 0;
      for (Id p : parts) {
        const int64_t pc = tp.value(p).cols();
        if (tp.needs_grad(p)) {
          Tn& gp = tp.grad_mut(p);
          for (int64_t i = 0; i < rows; ++i)
            for (int64_t c = 0; c < pc; ++c) gp.at(i, c) += g.at(i, off2 + c);
        }
        off2 += pc;
      }
    });
  }

  Id slice_cols(Id x, int64_t c0, int64_t c1) {
    const Tn& vx = value(x);
    if (c0 < 0 || c1 > vx.cols() || c0 > c1) throw ShapeError("slice_cols: bad range");
    Tn out({vx.rows(), c1 - c0});
    for (int64_t i = 0; i < vx.rows(); ++i)
      std::copy_n(vx.ptr() + i * vx.cols() + c0, c1 - c0, out.ptr() + i * (c1 - c0));
    return push("slice_cols", std::move(out), {x}, [x, c0, c1](TapeT& tp, Id y) {
      if (!tp.needs_grad(x)) return;
      const Tn& g = tp.grad_of(y);
      Tn& gx = tp.grad_mut(x);
      for (int64_t i = 0; i < g.rows(); ++i)
        for (int64_t c = 0; c < c1 - c0; ++c) gx.at(i, c0 + c) += g.at(i, c);
    });
  }

  // Broadcast a 1 x C (or length-C) bias over every row.
  Id add_rowvec(Id x, Id v) {
    const Tn& vx = value(x);
    const Tn& vv = value(v);
    if (vv.numel() != vx.cols()) throw ShapeError("add_rowvec: width mismatch");
    Tn out = vx;
    for (int64_t i = 0; i < vx.rows(); ++i)
      for (int64_t c = 0; c < vx.cols(); ++c) out.at(i, c) += vv[c];
    return push("add_rowvec", std::move(out), {x, v}, [x, v](TapeT& tp, Id y) {
      const Tn& g = tp.grad_of(y);
      if (tp.needs_grad(x)) tp.axpy(x, T(1), g);
      if (tp.needs_grad(v)) {
        Tn& gv = tp.grad_mut(v);
        for (int64_t c = 0; c < g.cols(); ++c) {
          double acc = 0.0;
          for (int64_t i = 0; i < g.rows(); ++i) acc += static_cast<double>(g.at(i, c));
          gv[c] += static_cast<T>(acc);
        }
      }
    });
  }

  // Scale row i of x by v[i] (v: R x 1 or length R).
  Id mul_colvec(Id x, Id v) {
    const Tn& vx = value(x);
    const Tn& vv = value(v);
    if (vv.numel() != vx.rows()) throw ShapeError("mul_colvec: height mismatch");
    Tn out = vx;
    for (int64_t i = 0; i < vx.rows(); ++i)
      for (int64_t c = 0; c < vx.cols(); ++c) out.at(i, c) *= vv[i];
    return push("mul_colvec", std::move(out), {x, v}, [x, v](TapeT& tp, Id y) {
      const Tn& g = tp.grad_of(y);
      const Tn& vx2 = tp.value(x);
      const Tn& vv2 = tp.value(v);
      if (tp.needs_grad(x)) {
        Tn& gx = tp.grad_mut(x);
        for (int64_t i = 0; i < g.rows(); ++i)
          for (int64_t c = 0; c < g.cols(); ++c) gx.at(i, c) += g.at(i, c) * vv2[i];
      }
      if (tp.needs_grad(v)) {
        Tn& gv = tp.grad_mut(v);
        for (int64_t i = 0; i < g.rows(); ++i) {
          double acc = 0.0;
          for (int64_t c = 0; c < g.cols(); ++c)
            acc += static_cast<double>(g.at(i, c)) * static_cast<double>(vx2.at(i, c));
          gv[i] += static_cast<T>(acc);
        }
      }
    });
  }

  // ---- nonlinearities ----

  Id tanh_(Id x) {
    Tn out = value(x);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
    return push("tanh", std::move(out), {x}, [x](TapeT& tp, Id y) {
      if (!tp.needs_grad(x)) return;
      const Tn& g = tp.grad_of(y);
      const Tn& vy = tp.value(y);
      Tn& gx = tp.grad_mut(x);
      for (int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * (T(1) - vy[i] * vy[i]);
    });
  }

  Id exp_(Id x) {
    Tn out = value(x);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
    return push("exp", std::move(out), {x}, [x](TapeT& tp, Id y) {
      if (!tp.needs_grad(x)) return;
      const Tn& g = tp.grad_of(y);
      const Tn& vy = tp.value(y);
      Tn& gx = tp.grad_mut(x);
      for (int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * vy[i];
    });
  }

  Id log_(Id x) {
    Tn out = value(x);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::log(out[i]);
    return push("log", std::move(out), {x}, [x](TapeT& tp, Id y) {
      if (!tp.needs_grad(x)) return;
      const Tn& g = tp.grad_of(y);
      const Tn& vx = tp.value(x);
      Tn& gx = tp.grad_mut(x);
      for (int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i] / vx[i];
    });
  }

  // log(1 + e^x), computed without overflow.
  Id softplus(Id x) {
    Tn out = value(x);
    for (int64_t i = 0; i < out.numel(); ++i) {
      double v = static_cast<double>(out[i]);
      out[i] = static_cast<T>(v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)));
    }
    return push("softplus", std::move(out), {x}, [x](TapeT& tp, Id y) {
      if (!tp.needs_grad(x)) return;
      const Tn& g = tp.grad_of(y);
      const Tn& vx = tp.value(x);
      Tn& gx = tp.grad_mut(x);
      for (int64_t i = 0; i < g.numel(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-static_cast<double>(vx[i])));
        gx[i] += g[i] * static_cast<T>(s);
      }
    });
  }

  // ---- row reductions / softmaxes ----

  Id row_softmax(Id x) {
    const Tn& vx = value(x);
    Tn out = vx;
    for (int64_t i = 0; i < vx.rows(); ++i) softmax_span(out.ptr() + i * vx.cols(), vx.cols());
    return push("row_softmax", std::move(out), {x}, [x](TapeT& tp, Id y) {
      if (!tp.needs_grad(x)) return;
      const Tn& g = tp.grad_of(y);
      const Tn& vy = tp.value(y);
      Tn& gx = tp.grad_mut(x);
      for (int64_t i = 0; i < g.rows(); ++i) {
        double dot = 0.0;
        for (int64_t c = 0; c < g.cols(); ++c)
          dot += static_cast<double>(g.at(i, c)) * static_cast<double>(vy.at(i, c));
        for (int64_t c = 0; c < g.cols(); ++c)
          gx.at(i, c) += vy.at(i, c) * (g.at(i, c) - static_cast<T>(dot));
      }
    });
  }

  Id row_sum(Id x) {
    const Tn& vx = value(x);
    Tn out({vx.rows(), 1});
    for (int64_t i = 0; i < vx.rows(); ++i) {
      double acc = 0.0;
      for (int64_t c = 0; c < vx.cols(); ++c) acc += static_cast<double>(vx.at(i, c));
      out[i] = static_cast<T>(acc);
    }
    return push("row_sum", std::move(out), {x}, [x](TapeT& tp, Id y) {
      if (!tp.needs_grad(x)) return;
      const Tn& g = tp.grad_of(y);
      Tn& gx = tp.grad_mut(x);
      for (int64_t i = 0; i < gx.rows(); ++i)
        for (int64_t c = 0; c < gx.cols(); ++c) gx.at(i, c) += g[i];
    });
  }

  // Diagonal of a square matrix as R x 1.
  Id row_diag(Id x) {
    const Tn& vx = value(x);
    if (vx.rows() != vx.cols()) throw ShapeError("row_diag: matrix not square");
    Tn out({vx.rows(), 1});
    for (int64_t i = 0; i < vx.rows(); ++i) out[i] = vx.at(i, i);
    return push("row_diag", std::move(out), {x}, [x](TapeT& tp, Id y) {
      if (!tp.needs_grad(x)) return;
      const Tn& g = tp.grad_of(y);
      Tn& gx = tp.grad_mut(x);
      for (int64_t i = 0; i < g.rows(); ++i) gx.at(i, i) += g[i];
    });
  }

  // y_i = log sum_{j != i} exp(x_ij), max-subtracted. Requires >= 2 columns.
  Id row_logsumexp_offdiag(Id x) {
    const Tn& vx = value(x);
    if (vx.rows() != vx.cols()) throw ShapeError("row_logsumexp_offdiag: matrix not square");
    if (vx.rows() < 2)
      throw ShapeError("row_logsumexp_offdiag: needs at least 2 rows (empty denominator)");
    Tn out({vx.rows(), 1});
    for (int64_t i = 0; i < vx.rows(); ++i) {
      double mx = -1e300;
      for (int64_t j = 0; j < vx.cols(); ++j)
        if (j != i) mx = std::max(mx, static_cast<double>(vx.at(i, j)));
      double acc = 0.0;
      for (int64_t j = 0; j < vx.cols(); ++j)
        if (j != i) acc += std::exp(static_cast<double>(vx.at(i, j)) - mx);
      out[i] = static_cast<T>(mx + std::log(acc));
    }
    return push("row_logsumexp_offdiag", std::move(out), {x}, [x](TapeT& tp, Id y) {
      if (!tp.needs_grad(x)) return;
      const Tn& g = tp.grad_of(y);
      const Tn& vx2 = tp.value(x);
      const Tn& vy = tp.value(y);
      Tn& gx = tp.grad_mut(x);
      for (int64_t i = 0; i < vx2.rows(); ++i)
        for (int64_t j = 0; j < vx2.cols(); ++j)
          if (j != i)
            gx.at(i, j) += g[i] * static_cast<T>(std::exp(static_cast<double>(vx2.at(i, j)) -
                                                          static_cast<double>(vy[i])));
    });
  }

  // ---- geometry ----

  // Rows scaled to unit L2 norm; all-zero rows stay zero (and receive zero
  // gradient), which realizes the sim(0, .) = 0 convention upstream.
  Id l2_normalize_rows(Id x) {
    const Tn& vx = value(x);
    Tn out = vx;
    std::vector<double> norms(static_cast<size_t>(vx.rows()));
    for (int64_t i = 0; i < vx.rows(); ++i) {
      double acc = 0.0;
      for (int64_t c = 0; c < vx.cols(); ++c)
        acc += static_cast<double>(vx.at(i, c)) * static_cast<double>(vx.at(i, c));
      double n = std::sqrt(acc);
      norms[i] = n;
      if (n < kZeroNorm) {
        for (int64_t c = 0; c < vx.cols(); ++c) out.at(i, c) = T(0);
      } else {
        for (int64_t c = 0; c < vx.cols(); ++c) out.at(i, c) = static_cast<T>(vx.at(i, c) / n);
      }
    }
    return push("l2_normalize_rows", std::move(out), {x},
                [x, norms = std::move(norms)](TapeT& tp, Id y) {
                  if (!tp.needs_grad(x)) return;
                  const Tn& g = tp.grad_of(y);
                  const Tn& vy = tp.value(y);
                  Tn& gx = tp.grad_mut(x);
                  for (int64_t i = 0; i < g.rows(); ++i) {
                    if (norms[i] < kZeroNorm) continue;
                    double dot = 0.0;
                    for (int64_t c = 0; c < g.cols(); ++c)
                      dot += static_cast<double>(g.at(i, c)) * static_cast<double>(vy.at(i, c));
                    for (int64_t c = 0; c < g.cols(); ++c)
                      gx.at(i, c) += static_cast<T>(
                          (static_cast<double>(g.at(i, c)) - dot * vy.at(i, c)) / norms[i]);
                  }
                });
  }

  // Per-row inner products of equally shaped matrices, as R x 1.
  Id row_dot(Id a, Id b) {
    check_same_shape("row_dot", a, b);
    const Tn& va = value(a);
    const Tn& vb = value(b);
    Tn out({va.rows(), 1});
    for (int64_t i = 0; i < va.rows(); ++i) {
      double acc = 0.0;
      for (int64_t c = 0; c < va.cols(); ++c)
        acc += static_cast<double>(va.at(i, c)) * static_cast<double>(vb.at(i, c));
      out[i] = static_cast<T>(acc);
    }
    return push("row_dot", std::move(out), {a, b}, [a, b](TapeT& tp, Id y) {
      const Tn& g = tp.grad_of(y);
      const Tn& va2 = tp.value(a);
      const Tn& vb2 = tp.value(b);
      if (tp.needs_grad(a)) {
        Tn& ga = tp.grad_mut(a);
        for (int64_t i = 0; i < va2.rows(); ++i)
          for (int64_t c = 0; c < va2.cols(); ++c) ga.at(i, c) += g[i] * vb2.at(i, c);
      }
      if (tp.needs_grad(b)) {
        Tn& gb = tp.grad_mut(b);
        for (int64_t i = 0; i < va2.rows(); ++i)
          for (int64_t c = 0; c < va2.cols(); ++c) gb.at(i, c) += g[i] * va2.at(i, c);
      }
    });
  }

  // D_ij = ||x_i - x_j||^2 over all row pairs.
  Id pairwise_sqdist(Id x) {
    const Tn& vx = value(x);
    const int64_t n = vx.rows(), d = vx.cols();
    Tn out({n, n});
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int64_t c = 0; c < d; ++c) {
          double diff = static_cast<double>(vx.at(i, c)) - static_cast<double>(vx.at(j, c));
          acc += diff * diff;
        }
        out.at(i, j) = static_cast<T>(acc);
      }
    return push("pairwise_sqdist", std::move(out), {x}, [x, n, d](TapeT& tp, Id y) {
      if (!tp.needs_grad(x)) return;
      const Tn& g = tp.grad_of(y);
      const Tn& vx2 = tp.value(x);
      Tn& gx = tp.grad_mut(x);
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
          double coeff = static_cast<double>(g.at(i, j)) + static_cast<double>(g.at(j, i));
          if (coeff == 0.0) continue;
          for (int64_t c = 0; c < d; ++c)
            gx.at(i, c) += static_cast<T>(
                2.0 * coeff *
                (static_cast<double>(vx2.at(i, c)) - static_cast<double>(vx2.at(j, c))));
        }
    });
  }

  // ---- scalar reductions ----

  Id sum(Id x) {
    double acc = 0.0;
    const Tn& vx = value(x);
    for (int64_t i = 0; i < vx.numel(); ++i) acc += static_cast<double>(vx[i]);
    return push("sum", Tn::scalar(static_cast<T>(acc)), {x}, [x](TapeT& tp, Id y) {
      if (!tp.needs_grad(x)) return;
      const T g = tp.grad_of(y)[0];
      Tn& gx = tp.grad_mut(x);
      for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
    });
  }

  Id mean(Id x) {
    const int64_t n = value(x).numel();
    if (n == 0) throw ShapeError("mean: empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(n));
  }

  Id sumsq(Id x) {
    double acc = 0.0;
    const Tn& vx = value(x);
    for (int64_t i = 0; i < vx.numel(); ++i)
      acc += static_cast<double>(vx[i]) * static_cast<double>(vx[i]);
    return push("sumsq", Tn::scalar(static_cast<T>(acc)), {x}, [x](TapeT& tp, Id y) {
      if (!tp.needs_grad(x)) return;
      const T g = tp.grad_of(y)[0];
      const Tn& vx2 = tp.value(x);
      Tn& gx = tp.grad_mut(x);
      for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += T(2) * g * vx2[i];
    });
  }

  // ---- segment ops (knowledge-graph attention) ----

  // Softmax over contiguous segments of a length-E column. Segment s covers
  // [offsets[s], offsets[s+1]); every element belongs to exactly one segment.
  Id segment_softmax(Id scores, std::vector<int64_t> offsets) {
    const Tn& vs = value(scores);
    if (vs.cols() != 1) throw ShapeError("segment_softmax: expects E x 1 scores");
    if (offsets.empty() || offsets.back() != vs.rows())
      throw ShapeError("segment_softmax: offsets do not cover scores");
    Tn out = vs;
    const int64_t nseg = static_cast<int64_t>(offsets.size()) - 1;
    for (int64_t s = 0; s < nseg; ++s)
      softmax_span(out.ptr() + offsets[s], offsets[s + 1] - offsets[s]);
    return push("segment_softmax", std::move(out), {scores},
                [scores, offsets = std::move(offsets)](TapeT& tp, Id y) {
                  if (!tp.needs_grad(scores)) return;
                  const Tn& g = tp.grad_of(y);
                  const Tn& vy = tp.value(y);
                  Tn& gx = tp.grad_mut(scores);
                  for (size_t s = 0; s + 1 < offsets.size(); ++s) {
                    double dot = 0.0;
                    for (int64_t e = offsets[s]; e < offsets[s + 1]; ++e)
                      dot += static_cast<double>(g[e]) * static_cast<double>(vy[e]);
                    for (int64_t e = offsets[s]; e < offsets[s + 1]; ++e)
                      gx[e] += vy[e] * (g[e] - static_cast<T>(dot));
                  }
                });
  }

  // out[seg_target[s]] = sum over edges e in segment s of coeffs[e] * rows[e].
  // Rows of `out` not targeted by any segment stay zero.
  Id segment_weighted_rows(Id coeffs, Id rows, std::vector<int64_t> offsets,
                           std::vector<int32_t> seg_target, int64_t out_rows) {
    const Tn& vc = value(coeffs);
    const Tn& vr = value(rows);
    if (vc.numel() != vr.rows()) throw ShapeError("segment_weighted_rows: coeff/row mismatch");
    if (offsets.size() != seg_target.size() + 1)
      throw ShapeError("segment_weighted_rows: offsets/targets mismatch");
    const int64_t d = vr.cols();
    Tn out({out_rows, d});
    const int64_t nseg = static_cast<int64_t>(seg_target.size());
#pragma omp parallel for schedule(static)
    for (int64_t s = 0; s < nseg; ++s) {
      T* dst = out.ptr() + seg_target[s] * d;
      for (int64_t e = offsets[s]; e < offsets[s + 1]; ++e) {
        const T a = vc[e];
        const T* src = vr.ptr() + e * d;
        for (int64_t c = 0; c < d; ++c) dst[c] += a * src[c];
      }
    }
    return push(
        "segment_weighted_rows", std::move(out), {coeffs, rows},
        [coeffs, rows, offsets = std::move(offsets), seg_target = std::move(seg_target),
         d](TapeT& tp, Id y) {
          const Tn& g = tp.grad_of(y);
          const Tn& vr2 = tp.value(rows);
          const Tn& vc2 = tp.value(coeffs);
          const int64_t nseg2 = static_cast<int64_t>(seg_target.size());
          if (tp.needs_grad(coeffs)) {
            Tn& gc = tp.grad_mut(coeffs);
#pragma omp parallel for schedule(static)
            for (int64_t s = 0; s < nseg2; ++s) {
              const T* go = g.ptr() + seg_target[s] * d;
              for (int64_t e = offsets[s]; e < offsets[s + 1]; ++e) {
                double acc = 0.0;
                const T* src = vr2.ptr() + e * d;
                for (int64_t c = 0; c < d; ++c)
                  acc += static_cast<double>(go[c]) * static_cast<double>(src[c]);
                gc[e] += static_cast<T>(acc);
              }
            }
          }
          if (tp.needs_grad(rows)) {
            Tn& gr = tp.grad_mut(rows);
#pragma omp parallel for schedule(static)
            for (int64_t s = 0; s < nseg2; ++s) {
              const T* go = g.ptr() + seg_target[s] * d;
              for (int64_t e = offsets[s]; e < offsets[s + 1]; ++e) {
                const T a = vc2[e];
                T* dst = gr.ptr() + e * d;
                for (int64_t c = 0; c < d; ++c) dst[c] += a * go[c];
              }
            }
          }
        });
  }

  // y_e = W[rel[e]] x_e with W a stack of square matrices, shape {R, d, d}.
  Id relation_transform(Id x, std::vector<int32_t> rel, Id w) {
    const Tn& vx = value(x);
    const Tn& vw = value(w);
    if (vw.rank() != 3 || vw.dim(1) != vw.dim(2) || vw.dim(1) != vx.cols())
      throw ShapeError("relation_transform: W must be {R,d,d} matching x columns");
    const int64_t e_count = vx.rows(), d = vx.cols(), r_count = vw.dim(0);
    if (static_cast<int64_t>(rel.size()) != e_count)
      throw ShapeError("relation_transform: relation list length mismatch");
    for (int32_t r : rel)
      if (r < 0 || r >= r_count) throw ShapeError("relation_transform: relation id out of range");
    Tn out({e_count, d});
#pragma omp parallel for schedule(static)
    for (int64_t e = 0; e < e_count; ++e) {
      const T* wm = vw.ptr() + static_cast<int64_t>(rel[e]) * d * d;
      const T* xv = vx.ptr() + e * d;
      T* yv = out.ptr() + e * d;
      for (int64_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (int64_t j = 0; j < d; ++j)
          acc += static_cast<double>(wm[i * d + j]) * static_cast<double>(xv[j]);
        yv[i] = static_cast<T>(acc);
      }
    }
    // Edges grouped per relation once, so dW accumulates deterministically.
    std::vector<std::vector<int64_t>> by_rel(static_cast<size_t>(r_count));
    for (int64_t e = 0; e < e_count; ++e) by_rel[static_cast<size_t>(rel[e])].push_back(e);
    return push(
        "relation_transform", std::move(out), {x, w},
        [x, w, rel = std::move(rel), by_rel = std::move(by_rel), d](TapeT& tp, Id y) {
          const Tn& g = tp.grad_of(y);
          const Tn& vx2 = tp.value(x);
          const Tn& vw2 = tp.value(w);
          if (tp.needs_grad(x)) {
            Tn& gx = tp.grad_mut(x);
            const int64_t e_count2 = vx2.rows();
#pragma omp parallel for schedule(static)
            for (int64_t e = 0; e < e_count2; ++e) {
              const T* wm = vw2.ptr() + static_cast<int64_t>(rel[e]) * d * d;
              const T* gv = g.ptr() + e * d;
              T* dst = gx.ptr() + e * d;
              for (int64_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (int64_t i = 0; i < d; ++i)
                  acc += static_cast<double>(wm[i * d + j]) * static_cast<double>(gv[i]);
                dst[j] += static_cast<T>(acc);
              }
            }
          }
          if (tp.needs_grad(w)) {
            Tn& gw = tp.grad_mut(w);
            const int64_t r_count2 = static_cast<int64_t>(by_rel.size());
#pragma omp parallel for schedule(dynamic)
            for (int64_t r = 0; r < r_count2; ++r) {
              T* wg = gw.ptr() + r * d * d;
              for (int64_t e : by_rel[static_cast<size_t>(r)]) {
                const T* gv = g.ptr() + e * d;
                const T* xv = vx2.ptr() + e * d;
                for (int64_t i = 0; i < d; ++i)
                  for (int64_t j = 0; j < d; ++j) wg[i * d + j] += gv[i] * xv[j];
              }
            }
          }
        });
  }

  // ---- composites ----

  // Cosine similarity of every row of a against every row of b; zero rows
  // give zero similarity.
  Id cosine_matrix(Id a, Id b) { return matmul_nt(l2_normalize_rows(a), l2_normalize_rows(b)); }

  Id cosine_rows(Id a, Id b) { return row_dot(l2_normalize_rows(a), l2_normalize_rows(b)); }

  // ---- engine ----

  const Tn& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }

  bool needs_grad(Id id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

  // Gradient of a node after backward(); allocates zeros if untouched.
  const Tn& grad(Id id) { return grad_mut(id); }

  double scalar(Id id) const { return static_cast<double>(value(id).item()); }

  void backward(Id loss) {
    if (value(loss).numel() != 1) throw ShapeError("backward: loss must be scalar");
    if (!nodes_[static_cast<size_t>(loss)].needs_grad) return;  // constant program
    grad_mut(loss)[0] = T(1);
    for (Id i = loss; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (!n.needs_grad || !n.backward) continue;
      if (n.grad.numel() == 0) continue;  // never reached from the loss
      n.backward(*this, i);
    }
  }

  size_t size() const { return nodes_.size(); }

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tn value;
    Tn grad;  // empty until first touched
    bool needs_grad = false;
    std::function<void(TapeT&, Id)> backward;
  };

  static constexpr double kZeroNorm = 1e-12;

  friend class TapeAccess;

  Id push(const char* op, Tn value, const std::vector<Id>& parents,
          std::function<void(TapeT&, Id)> back, bool force_grad = false) {
    if (!value.all_finite()) throw NumericError(op, "non-finite output " + value.shape_str());
    Node n;
    n.value = std::move(value);
    n.needs_grad = force_grad;
    for (Id p : parents) n.needs_grad = n.needs_grad || needs_grad(p);
    if (n.needs_grad) n.backward = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  Tn& grad_mut(Id id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.numel() == 0) n.grad = Tn(n.value.shape());
    return n.grad;
  }

  const Tn& grad_of(Id id) { return grad_mut(id); }

  void axpy(Id target, T a, const Tn& g) {
    if (!needs_grad(target)) return;
    Tn& t = grad_mut(target);
    if (!t.same_shape(g)) throw ShapeError("gradient shape mismatch");
    for (int64_t i = 0; i < t.numel(); ++i) t[i] += a * g[i];
  }

  void check_same_shape(const char* op, Id a, Id b) const {
    if (!value(a).same_shape(value(b)))
      throw ShapeError(std::string(op) + ": shape mismatch " + value(a).shape_str() + " vs " +
                       value(b).shape_str());
  }

  static void softmax_span(T* v, int64_t n) {
    double mx = -1e300;
    for (int64_t i = 0; i < n; ++i) mx = std::max(mx, static_cast<double>(v[i]));
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += std::exp(static_cast<double>(v[i]) - mx);
    for (int64_t i = 0; i < n; ++i)
      v[i] = static_cast<T>(std::exp(static_cast<double>(v[i]) - mx) / acc);
  }

  std::vector<Node> nodes_;
  std::vector<Tn>* detach_record_ = nullptr;
  const std::vector<Tn>* detach_replay_ = nullptr;
  size_t detach_replay_pos_ = 0;
};

using Tape = TapeT<float>;

}  // namespace slif
