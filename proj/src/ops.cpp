#include "attnseg/ops.hpp"

#include <cmath>
#include <utility>

#include "attnseg/kernels.hpp"

namespace attnseg::ops {

namespace {

constexpr long long kParallelCutoff = 1 << 15;

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> bp) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const Var& p : parents) {
    n->requires_grad = n->requires_grad || p.requires_grad();
    n->parents.push_back(p.node());
  }
  if (n->requires_grad) n->backprop = std::move(bp);
  return Var::from_node(n);
}

// Writes a gradient contribution produced by `fill` into parent p. If the
// parent has no gradient yet the target is written in place, otherwise a
// scratch tensor is added on.
template <class Fill>
void deposit(Node& p, const Fill& fill) {
  if (!p.grad.defined()) {
    p.grad = Tensor(p.value.shape());
    fill(p.grad);
  } else {
    Tensor tmp(p.value.shape());
    fill(tmp);
    Scalar* dst = p.grad.data();
    const Scalar* src = tmp.data();
    for (long long i = 0; i < tmp.size(); ++i) dst[i] += src[i];
  }
}

void check_rank4(const Var& v, const char* what) {
  check_shape(v.value().rank() == 4, std::string(what) + ": expected NCHW tensor");
}

template <class F>
Var elementwise_binary(const Var& a, const Var& b, F f,
                       std::function<void(Node&)> bp) {
  check_shape(a.value().same_shape(b.value()), "elementwise op: shape mismatch");
  Tensor out(a.value().shape());
  const Scalar* pa = a.value().data();
  const Scalar* pb = b.value().data();
  Scalar* po = out.data();
  const long long n = out.size();
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (long long i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
  return make_op(std::move(out), {a, b}, std::move(bp));
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return elementwise_binary(
      a, b, [](Scalar x, Scalar y) { return x + y; },
      [](Node& self) {
        for (int k = 0; k < 2; ++k) {
          Node& p = *self.parents[k];
          if (!p.requires_grad) continue;
          const Scalar* g = self.grad.data();
          deposit(p, [&](Tensor& t) {
            Scalar* d = t.data();
            for (long long i = 0; i < t.size(); ++i) d[i] = g[i];
          });
        }
      });
}

Var sub(const Var& a, const Var& b) {
  return elementwise_binary(
      a, b, [](Scalar x, Scalar y) { return x - y; },
      [](Node& self) {
        for (int k = 0; k < 2; ++k) {
          Node& p = *self.parents[k];
          if (!p.requires_grad) continue;
          const Scalar* g = self.grad.data();
          const Scalar sign = k == 0 ? 1 : -1;
          deposit(p, [&](Tensor& t) {
            Scalar* d = t.data();
            for (long long i = 0; i < t.size(); ++i) d[i] = sign * g[i];
          });
        }
      });
}

Var mul(const Var& a, const Var& b) {
  return elementwise_binary(
      a, b, [](Scalar x, Scalar y) { return x * y; },
      [](Node& self) {
        const Scalar* g = self.grad.data();
        for (int k = 0; k < 2; ++k) {
          Node& p = *self.parents[k];
          if (!p.requires_grad) continue;
          const Scalar* other = self.parents[1 - k]->value.data();
          deposit(p, [&](Tensor& t) {
            Scalar* d = t.data();
            for (long long i = 0; i < t.size(); ++i) d[i] = g[i] * other[i];
          });
        }
      });
}

Var div(const Var& a, const Var& b) {
  return elementwise_binary(
      a, b, [](Scalar x, Scalar y) { return x / y; },
      [](Node& self) {
        const Scalar* g = self.grad.data();
        const Scalar* pa = self.parents[0]->value.data();
        const Scalar* pb = self.parents[1]->value.data();
        if (self.parents[0]->requires_grad) {
          deposit(*self.parents[0], [&](Tensor& t) {
            Scalar* d = t.data();
            for (long long i = 0; i < t.size(); ++i) d[i] = g[i] / pb[i];
          });
        }
        if (self.parents[1]->requires_grad) {
          deposit(*self.parents[1], [&](Tensor& t) {
            Scalar* d = t.data();
            for (long long i = 0; i < t.size(); ++i)
              d[i] = -g[i] * pa[i] / (pb[i] * pb[i]);
          });
        }
      });
}

namespace {

template <class F, class DF>
Var elementwise_unary(const Var& a, F f, DF df) {
  Tensor out(a.value().shape());
  const Scalar* pa = a.value().data();
  Scalar* po = out.data();
  const long long n = out.size();
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
  for (long long i = 0; i < n; ++i) po[i] = f(pa[i]);
  return make_op(std::move(out), {a}, [df](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Scalar* g = self.grad.data();
    const Scalar* x = p.value.data();
    const Scalar* y = self.value.data();
    deposit(p, [&](Tensor& t) {
      Scalar* d = t.data();
      const long long n = t.size();
#pragma omp parallel for schedule(static) if (n > kParallelCutoff)
      for (long long i = 0; i < n; ++i) d[i] = g[i] * df(x[i], y[i]);
    });
  });
}

}  // namespace

Var add_scalar(const Var& a, Scalar s) {
  return elementwise_unary(
      a, [s](Scalar x) { return x + s; }, [](Scalar, Scalar) { return Scalar(1); });
}

Var mul_scalar(const Var& a, Scalar s) {
  return elementwise_unary(
      a, [s](Scalar x) { return x * s; }, [s](Scalar, Scalar) { return s; });
}

Var pow_scalar(const Var& a, Scalar p) {
  return elementwise_unary(
      a, [p](Scalar x) { return std::pow(x, p); },
      [p](Scalar x, Scalar) { return p * std::pow(x, p - 1); });
}

Var exp_(const Var& a) {
  return elementwise_unary(
      a, [](Scalar x) { return std::exp(x); }, [](Scalar, Scalar y) { return y; });
}

Var log_(const Var& a) {
  return elementwise_unary(
      a, [](Scalar x) { return std::log(x); },
      [](Scalar x, Scalar) { return Scalar(1) / x; });
}

Var abs_(const Var& a) {
  return elementwise_unary(
      a, [](Scalar x) { return std::abs(x); },
      [](Scalar x, Scalar) { return x > 0 ? Scalar(1) : (x < 0 ? Scalar(-1) : Scalar(0)); });
}

Var relu(const Var& a) {
  return elementwise_unary(
      a, [](Scalar x) { return x > 0 ? x : Scalar(0); },
      [](Scalar x, Scalar) { return x > 0 ? Scalar(1) : Scalar(0); });
}

Var leaky_relu(const Var& a, Scalar slope) {
  return elementwise_unary(
      a, [slope](Scalar x) { return x > 0 ? x : slope * x; },
      [slope](Scalar x, Scalar) { return x > 0 ? Scalar(1) : slope; });
}

Var sigmoid(const Var& a) {
  return elementwise_unary(
      a, [](Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); },
      [](Scalar, Scalar y) { return y * (1 - y); });
}

Var sum_all(const Var& a) {
  Scalar acc = 0;
  const Scalar* p = a.value().data();
  for (long long i = 0; i < a.value().size(); ++i) acc += p[i];
  return make_op(Tensor::scalar(acc), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Scalar g = self.grad[0];
    deposit(p, [&](Tensor& t) {
      Scalar* d = t.data();
      for (long long i = 0; i < t.size(); ++i) d[i] = g;
    });
  });
}

Var mean_all(const Var& a) {
  return mul_scalar(sum_all(a), Scalar(1) / (Scalar)a.value().size());
}

Var sum_hw(const Var& a) {
  check_rank4(a, "sum_hw");
  const auto& s = a.value().shape();
  const int N = s[0], C = s[1];
  const long long hw = (long long)s[2] * s[3];
  Tensor out({N, C});
  const Scalar* pa = a.value().data();
  for (int i = 0; i < N * C; ++i) {
    Scalar acc = 0;
    const Scalar* base = pa + i * hw;
    for (long long j = 0; j < hw; ++j) acc += base[j];
    out[i] = acc;
  }
  return make_op(std::move(out), {a}, [hw](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Scalar* g = self.grad.data();
    deposit(p, [&](Tensor& t) {
      Scalar* d = t.data();
      const long long nc = self.grad.size();
      for (long long i = 0; i < nc; ++i)
        for (long long j = 0; j < hw; ++j) d[i * hw + j] = g[i];
    });
  });
}

Var mean_hw(const Var& a) {
  const auto& s = a.value().shape();
  return mul_scalar(sum_hw(a), Scalar(1) / ((Scalar)s[2] * s[3]));
}

Var max_hw(const Var& a) {
  check_rank4(a, "max_hw");
  const auto& s = a.value().shape();
  const int N = s[0], C = s[1];
  const long long hw = (long long)s[2] * s[3];
  Tensor out({N, C});
  auto argmax = std::make_shared<std::vector<long long>>(N * C);
  const Scalar* pa = a.value().data();
  for (int i = 0; i < N * C; ++i) {
    const Scalar* base = pa + i * hw;
    long long best = 0;
    for (long long j = 1; j < hw; ++j)
      if (base[j] > base[best]) best = j;
    (*argmax)[i] = best;
    out[i] = base[best];
  }
  return make_op(std::move(out), {a}, [argmax, hw](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Scalar* g = self.grad.data();
    deposit(p, [&](Tensor& t) {
      t.fill(0);
      Scalar* d = t.data();
      for (size_t i = 0; i < argmax->size(); ++i) d[i * hw + (*argmax)[i]] = g[i];
    });
  });
}

Var broadcast_hw(const Var& a, int h, int w) {
  check_shape(a.value().rank() == 2, "broadcast_hw: expected [N,C]");
  const int N = a.value().dim(0), C = a.value().dim(1);
  Tensor out({N, C, h, w});
  const long long hw = (long long)h * w;
  const Scalar* pa = a.value().data();
  Scalar* po = out.data();
  for (int i = 0; i < N * C; ++i)
    for (long long j = 0; j < hw; ++j) po[i * hw + j] = pa[i];
  return make_op(std::move(out), {a}, [hw](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Scalar* g = self.grad.data();
    deposit(p, [&](Tensor& t) {
      Scalar* d = t.data();
      for (long long i = 0; i < t.size(); ++i) {
        Scalar acc = 0;
        const Scalar* base = g + i * hw;
        for (long long j = 0; j < hw; ++j) acc += base[j];
        d[i] = acc;
      }
    });
  });
}

Var broadcast_chan(const Var& p, int n, int h, int w) {
  check_shape(p.value().rank() == 1, "broadcast_chan: expected [C]");
  const int C = p.value().dim(0);
  Tensor out({n, C, h, w});
  const long long hw = (long long)h * w;
  const Scalar* pp = p.value().data();
  Scalar* po = out.data();
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < C; ++c)
      for (long long j = 0; j < hw; ++j) po[((long long)i * C + c) * hw + j] = pp[c];
  return make_op(std::move(out), {p}, [n, hw](Node& self) {
    Node& par = *self.parents[0];
    if (!par.requires_grad) return;
    const Scalar* g = self.grad.data();
    const int C = (int)par.value.size();
    deposit(par, [&](Tensor& t) {
      Scalar* d = t.data();
      for (int c = 0; c < C; ++c) {
        Scalar acc = 0;
        for (int i = 0; i < n; ++i) {
          const Scalar* base = g + ((long long)i * C + c) * hw;
          for (long long j = 0; j < hw; ++j) acc += base[j];
        }
        d[c] = acc;
      }
    });
  });
}

Var sum_channels(const Var& a) {
  check_rank4(a, "sum_channels");
  const auto& s = a.value().shape();
  const int N = s[0], C = s[1], H = s[2], W = s[3];
  const long long hw = (long long)H * W;
  Tensor out({N, 1, H, W});
  const Scalar* pa = a.value().data();
  Scalar* po = out.data();
  for (int n = 0; n < N; ++n)
    for (long long j = 0; j < hw; ++j) {
      Scalar acc = 0;
      for (int c = 0; c < C; ++c) acc += pa[((long long)n * C + c) * hw + j];
      po[n * hw + j] = acc;
    }
  return make_op(std::move(out), {a}, [C, hw](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Scalar* g = self.grad.data();
    const int N = self.grad.dim(0);
    deposit(p, [&](Tensor& t) {
      Scalar* d = t.data();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
          for (long long j = 0; j < hw; ++j)
            d[((long long)n * C + c) * hw + j] = g[n * hw + j];
    });
  });
}

Var scale_channels(const Var& f, const Var& gate) {
  check_rank4(f, "scale_channels");
  check_shape(gate.value().rank() == 2 && gate.value().dim(0) == f.value().dim(0) &&
                  gate.value().dim(1) == f.value().dim(1),
              "scale_channels: gate must be [N,C]");
  const auto& s = f.value().shape();
  const long long hw = (long long)s[2] * s[3];
  const int NC = s[0] * s[1];
  Tensor out(s);
  const Scalar* pf = f.value().data();
  const Scalar* pg = gate.value().data();
  Scalar* po = out.data();
#pragma omp parallel for schedule(static) if (out.size() > kParallelCutoff)
  for (int i = 0; i < NC; ++i) {
    const Scalar gv = pg[i];
    for (long long j = 0; j < hw; ++j) po[i * hw + j] = pf[i * hw + j] * gv;
  }
  return make_op(std::move(out), {f, gate}, [hw, NC](Node& self) {
    const Scalar* g = self.grad.data();
    Node& pf = *self.parents[0];
    Node& pg = *self.parents[1];
    if (pf.requires_grad) {
      const Scalar* gate = pg.value.data();
      deposit(pf, [&](Tensor& t) {
        Scalar* d = t.data();
#pragma omp parallel for schedule(static) if (t.size() > kParallelCutoff)
        for (int i = 0; i < NC; ++i)
          for (long long j = 0; j < hw; ++j) d[i * hw + j] = g[i * hw + j] * gate[i];
      });
    }
    if (pg.requires_grad) {
      const Scalar* f = pf.value.data();
      deposit(pg, [&](Tensor& t) {
        Scalar* d = t.data();
        for (int i = 0; i < NC; ++i) {
          Scalar acc = 0;
          for (long long j = 0; j < hw; ++j) acc += g[i * hw + j] * f[i * hw + j];
          d[i] = acc;
        }
      });
    }
  });
}

Var scale_spatial(const Var& f, const Var& map) {
  check_rank4(f, "scale_spatial");
  const auto& s = f.value().shape();
  check_shape(map.value().rank() == 4 && map.value().dim(0) == s[0] &&
                  map.value().dim(1) == 1 && map.value().dim(2) == s[2] &&
                  map.value().dim(3) == s[3],
              "scale_spatial: map must be [N,1,H,W]");
  const int N = s[0], C = s[1];
  const long long hw = (long long)s[2] * s[3];
  Tensor out(s);
  const Scalar* pf = f.value().data();
  const Scalar* pm = map.value().data();
  Scalar* po = out.data();
#pragma omp parallel for schedule(static) if (out.size() > kParallelCutoff)
  for (int nc = 0; nc < N * C; ++nc) {
    const Scalar* m = pm + (nc / C) * hw;
    for (long long j = 0; j < hw; ++j) po[nc * hw + j] = pf[nc * hw + j] * m[j];
  }
  return make_op(std::move(out), {f, map}, [N, C, hw](Node& self) {
    const Scalar* g = self.grad.data();
    Node& pf = *self.parents[0];
    Node& pm = *self.parents[1];
    if (pf.requires_grad) {
      const Scalar* m = pm.value.data();
      deposit(pf, [&](Tensor& t) {
        Scalar* d = t.data();
#pragma omp parallel for schedule(static) if (t.size() > kParallelCutoff)
        for (int nc = 0; nc < N * C; ++nc) {
          const Scalar* mrow = m + (nc / C) * hw;
          for (long long j = 0; j < hw; ++j) d[nc * hw + j] = g[nc * hw + j] * mrow[j];
        }
      });
    }
    if (pm.requires_grad) {
      const Scalar* f = pf.value.data();
      deposit(pm, [&](Tensor& t) {
        Scalar* d = t.data();
        for (int n = 0; n < N; ++n)
          for (long long j = 0; j < hw; ++j) {
            Scalar acc = 0;
            for (int c = 0; c < C; ++c) {
              const long long k = ((long long)n * C + c) * hw + j;
              acc += g[k] * f[k];
            }
            d[n * hw + j] = acc;
          }
      });
    }
  });
}

Var softmax_channels(const Var& a) {
  check_rank4(a, "softmax_channels");
  const auto& s = a.value().shape();
  const int N = s[0], C = s[1];
  const long long hw = (long long)s[2] * s[3];
  Tensor out(s);
  const Scalar* pa = a.value().data();
  Scalar* po = out.data();
#pragma omp parallel for schedule(static) if (out.size() > kParallelCutoff)
  for (long long p = 0; p < (long long)N * hw; ++p) {
    const long long n = p / hw, j = p % hw;
    const Scalar* col = pa + n * C * hw + j;
    Scalar m = col[0];
    for (int c = 1; c < C; ++c) m = std::max(m, col[c * hw]);
    Scalar z = 0;
    for (int c = 0; c < C; ++c) z += std::exp(col[c * hw] - m);
    Scalar* ocol = po + n * C * hw + j;
    for (int c = 0; c < C; ++c) ocol[c * hw] = std::exp(col[c * hw] - m) / z;
  }
  return make_op(std::move(out), {a}, [N, C, hw](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const Scalar* g = self.grad.data();
    const Scalar* y = self.value.data();
    deposit(p, [&](Tensor& t) {
      Scalar* d = t.data();
#pragma omp parallel for schedule(static) if (t.size() > kParallelCutoff)
      for (long long pix = 0; pix < (long long)N * hw; ++pix) {
        const long long n = pix / hw, j = pix % hw;
        const long long base = n * C * hw + j;
        Scalar dot = 0;
        for (int c = 0; c < C; ++c) dot += g[base + c * hw] * y[base + c * hw];
        for (int c = 0; c < C; ++c)
          d[base + c * hw] = y[base + c * hw] * (g[base + c * hw] - dot);
      }
    });
  });
}

Var concat_channels(const Var& a, const Var& b) {
  check_rank4(a, "concat_channels");
  check_rank4(b, "concat_channels");
  const auto& sa = a.value().shape();
  const auto& sb = b.value().shape();
  check_shape(sa[0] == sb[0] && sa[2] == sb[2] && sa[3] == sb[3],
              "concat_channels: N/H/W mismatch");
  const int N = sa[0], Ca = sa[1], Cb = sb[1];
  const long long hw = (long long)sa[2] * sa[3];
  Tensor out({N, Ca + Cb, sa[2], sa[3]});
  const Scalar* pa = a.value().data();
  const Scalar* pb = b.value().data();
  Scalar* po = out.data();
  for (int n = 0; n < N; ++n) {
    std::copy(pa + (long long)n * Ca * hw, pa + (long long)(n + 1) * Ca * hw,
              po + (long long)n * (Ca + Cb) * hw);
    std::copy(pb + (long long)n * Cb * hw, pb + (long long)(n + 1) * Cb * hw,
              po + ((long long)n * (Ca + Cb) + Ca) * hw);
  }
  return make_op(std::move(out), {a, b}, [N, Ca, Cb, hw](Node& self) {
    const Scalar* g = self.grad.data();
    for (int k = 0; k < 2; ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      const int C = k == 0 ? Ca : Cb;
      const int off = k == 0 ? 0 : Ca;
      deposit(p, [&](Tensor& t) {
        Scalar* d = t.data();
        for (int n = 0; n < N; ++n)
          std::copy(g + ((long long)n * (Ca + Cb) + off) * hw,
                    g + ((long long)n * (Ca + Cb) + off + C) * hw,
                    d + (long long)n * C * hw);
      });
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  check_shape(x.value().rank() == 2, "linear: x must be [N,C]");
  check_shape(w.value().rank() == 2, "linear: w must be [D,C]");
  const int N = x.value().dim(0), C = x.value().dim(1), D = w.value().dim(0);
  check_shape(w.value().dim(1) == C, "linear: weight/input width mismatch");
  check_shape(b.value().rank() == 1 && b.value().dim(0) == D, "linear: bias must be [D]");
  Tensor out({N, D});
  const Scalar* px = x.value().data();
  const Scalar* pw = w.value().data();
  const Scalar* pb = b.value().data();
  Scalar* po = out.data();
  for (int n = 0; n < N; ++n)
    for (int d = 0; d < D; ++d) {
      Scalar acc = pb[d];
      for (int c = 0; c < C; ++c) acc += px[n * C + c] * pw[d * C + c];
      po[n * D + d] = acc;
    }
  return make_op(std::move(out), {x, w, b}, [N, C, D](Node& self) {
    const Scalar* g = self.grad.data();
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    if (px.requires_grad) {
      const Scalar* w = pw.value.data();
      deposit(px, [&](Tensor& t) {
        Scalar* d = t.data();
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            Scalar acc = 0;
            for (int k = 0; k < D; ++k) acc += g[n * D + k] * w[k * C + c];
            d[n * C + c] = acc;
          }
      });
    }
    if (pw.requires_grad) {
      const Scalar* x = px.value.data();
      deposit(pw, [&](Tensor& t) {
        Scalar* d = t.data();
        for (int k = 0; k < D; ++k)
          for (int c = 0; c < C; ++c) {
            Scalar acc = 0;
            for (int n = 0; n < N; ++n) acc += g[n * D + k] * x[n * C + c];
            d[k * C + c] = acc;
          }
      });
    }
    if (pb.requires_grad) {
      deposit(pb, [&](Tensor& t) {
        Scalar* d = t.data();
        for (int k = 0; k < D; ++k) {
          Scalar acc = 0;
          for (int n = 0; n < N; ++n) acc += g[n * D + k];
          d[k] = acc;
        }
      });
    }
  });
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  check_rank4(x, "conv2d input");
  check_rank4(w, "conv2d weight");
  const auto& sx = x.value().shape();
  const auto& sw = w.value().shape();
  check_shape(sw[1] == sx[1], "conv2d: channel mismatch");
  kernels::ConvDims d{sx[0], sx[1], sx[2], sx[3], sw[0], sw[2], sw[3], stride, pad};
  check_shape(d.ho() >= 1 && d.wo() >= 1, "conv2d: output would be empty");
  if (b.defined())
    check_shape(b.value().rank() == 1 && b.value().dim(0) == sw[0],
                "conv2d: bias must be [Co]");
  Tensor out({d.n, d.co, d.ho(), d.wo()});
  kernels::conv2d_fwd(x.value().data(), w.value().data(),
                      b.defined() ? b.value().data() : nullptr, out.data(), d);
  std::vector<Var> parents = {x, w};
  if (b.defined()) parents.push_back(b);
  return make_op(std::move(out), std::move(parents), [d](Node& self) {
    const Tensor& gy = self.grad;
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    if (px.requires_grad) {
      deposit(px, [&](Tensor& t) {
        kernels::conv2d_bwd_data(gy.data(), pw.value.data(), t.data(), d);
      });
    }
    if (pw.requires_grad) {
      deposit(pw, [&](Tensor& t) {
        kernels::conv2d_bwd_weights(px.value.data(), gy.data(), t.data(), d);
      });
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      deposit(*self.parents[2], [&](Tensor& t) {
        kernels::conv2d_bwd_bias(gy.data(), t.data(), d.n, d.co, d.ho(), d.wo());
      });
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  check_rank4(x, "conv_transpose2d input");
  check_rank4(w, "conv_transpose2d weight");
  const auto& sx = x.value().shape();
  const auto& sw = w.value().shape();  // [ci, co, kh, kw]
  check_shape(sw[0] == sx[1], "conv_transpose2d: channel mismatch");
  const int Co = sw[1], kh = sw[2], kw = sw[3];
  const int Ho = (sx[2] - 1) * stride - 2 * pad + kh;
  const int Wo = (sx[3] - 1) * stride - 2 * pad + kw;
  check_shape(Ho >= 1 && Wo >= 1, "conv_transpose2d: output would be empty");
  // Dims of the conv whose data-gradient equals this transposed conv.
  kernels::ConvDims d{sx[0], Co, Ho, Wo, sx[1], kh, kw, stride, pad};
  Tensor out({sx[0], Co, Ho, Wo});
  kernels::conv2d_bwd_data(x.value().data(), w.value().data(), out.data(), d);
  if (b.defined()) {
    check_shape(b.value().rank() == 1 && b.value().dim(0) == Co,
                "conv_transpose2d: bias must be [Co]");
    Scalar* po = out.data();
    const Scalar* pb = b.value().data();
    const long long hw = (long long)Ho * Wo;
    for (int n = 0; n < sx[0]; ++n)
      for (int c = 0; c < Co; ++c)
        for (long long j = 0; j < hw; ++j) po[((long long)n * Co + c) * hw + j] += pb[c];
  }
  std::vector<Var> parents = {x, w};
  if (b.defined()) parents.push_back(b);
  return make_op(std::move(out), std::move(parents), [d](Node& self) {
    const Tensor& gy = self.grad;
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    if (px.requires_grad) {
      deposit(px, [&](Tensor& t) {
        kernels::conv2d_fwd(gy.data(), pw.value.data(), nullptr, t.data(), d);
      });
    }
    if (pw.requires_grad) {
      deposit(pw, [&](Tensor& t) {
        kernels::conv2d_bwd_weights(gy.data(), px.value.data(), t.data(), d);
      });
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      deposit(*self.parents[2], [&](Tensor& t) {
        kernels::conv2d_bwd_bias(gy.data(), t.data(), d.n, d.ci, d.h, d.w);
      });
    }
  });
}

namespace {
// symmetric reflection: -1 -> 0, -2 -> 1, H -> H-1, H+1 -> H-2
inline int reflect_idx(int i, int n) {
  if (i < 0) return -i - 1;
  if (i >= n) return 2 * n - 1 - i;
  return i;
}
}  // namespace

Var reflect_pad2d(const Var& x, int p) {
  check_rank4(x, "reflect_pad2d");
  const auto& s = x.value().shape();
  const int N = s[0], C = s[1], H = s[2], W = s[3];
  check_shape(p >= 0 && p <= H && p <= W, "reflect_pad2d: pad exceeds size");
  const int Hp = H + 2 * p, Wp = W + 2 * p;
  Tensor out({N, C, Hp, Wp});
  const Scalar* px = x.value().data();
  Scalar* po = out.data();
#pragma omp parallel for schedule(static) if (out.size() > kParallelCutoff)
  for (int nc = 0; nc < N * C; ++nc) {
    const Scalar* xp = px + (long long)nc * H * W;
    Scalar* op = po + (long long)nc * Hp * Wp;
    for (int y = 0; y < Hp; ++y) {
      const int sy = reflect_idx(y - p, H);
      for (int xx = 0; xx < Wp; ++xx)
        op[(long long)y * Wp + xx] = xp[(long long)sy * W + reflect_idx(xx - p, W)];
    }
  }
  return make_op(std::move(out), {x}, [N, C, H, W, p](Node& self) {
    Node& par = *self.parents[0];
    if (!par.requires_grad) return;
    const int Hp = H + 2 * p, Wp = W + 2 * p;
    const Scalar* g = self.grad.data();
    deposit(par, [&](Tensor& t) {
      t.fill(0);
      Scalar* d = t.data();
      // serial scatter keeps accumulation order fixed
      for (int nc = 0; nc < N * C; ++nc) {
        const Scalar* gp = g + (long long)nc * Hp * Wp;
        Scalar* dp = d + (long long)nc * H * W;
        for (int y = 0; y < Hp; ++y) {
          const int sy = reflect_idx(y - p, H);
          for (int xx = 0; xx < Wp; ++xx)
            dp[(long long)sy * W + reflect_idx(xx - p, W)] += gp[(long long)y * Wp + xx];
        }
      }
    });
  });
}

Var nearest_upsample2x(const Var& x) {
  check_rank4(x, "nearest_upsample2x");
  const auto& s = x.value().shape();
  const int N = s[0], C = s[1], H = s[2], W = s[3];
  Tensor out({N, C, 2 * H, 2 * W});
  const Scalar* px = x.value().data();
  Scalar* po = out.data();
#pragma omp parallel for schedule(static) if (out.size() > kParallelCutoff)
  for (int nc = 0; nc < N * C; ++nc) {
    const Scalar* xp = px + (long long)nc * H * W;
    Scalar* op = po + (long long)nc * 4 * H * W;
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        const Scalar v = xp[(long long)y * W + xx];
        Scalar* row0 = op + (long long)(2 * y) * 2 * W + 2 * xx;
        Scalar* row1 = row0 + 2 * W;
        row0[0] = row0[1] = row1[0] = row1[1] = v;
      }
  }
  return make_op(std::move(out), {x}, [N, C, H, W](Node& self) {
    Node& par = *self.parents[0];
    if (!par.requires_grad) return;
    const Scalar* g = self.grad.data();
    deposit(par, [&](Tensor& t) {
      Scalar* d = t.data();
#pragma omp parallel for schedule(static) if (t.size() > kParallelCutoff)
      for (int nc = 0; nc < N * C; ++nc) {
        const Scalar* gp = g + (long long)nc * 4 * H * W;
        Scalar* dp = d + (long long)nc * H * W;
        for (int y = 0; y < H; ++y)
          for (int xx = 0; xx < W; ++xx) {
            const Scalar* row0 = gp + (long long)(2 * y) * 2 * W + 2 * xx;
            const Scalar* row1 = row0 + 2 * W;
            dp[(long long)y * W + xx] = row0[0] + row0[1] + row1[0] + row1[1];
          }
      }
    });
  });
}

Var reshape(const Var& x, std::vector<int> shape) {
  Tensor out = x.value().reshaped(shape);
  return make_op(std::move(out), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.accumulate(self.grad.reshaped(p.value.shape()));
  });
}

}  // namespace attnseg::ops
