// OpenMP kernels. Parallelism is always over disjoint output elements and the
// per-element accumulation order matches the serial reference (ci, ky, kx for
// forward; co, ky, kx for data; n, oy, ox for weights), so results are
// bit-identical to the reference for any thread count.

#include <omp.h>

#include "attnseg/kernels.hpp"

namespace attnseg::kernels::omp {

void conv2d_fwd(const Scalar* x, const Scalar* w, const Scalar* bias, Scalar* y,
                const ConvDims& d) {
  const int ho = d.ho(), wo = d.wo();
  const int rows = d.n * d.co * ho;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int oy = r % ho;
    const int co = (r / ho) % d.co;
    const int n = r / (ho * d.co);
    Scalar* yrow = y + (size_t)r * wo;
    const Scalar binit = bias ? bias[co] : Scalar(0);
    for (int ox = 0; ox < wo; ++ox) yrow[ox] = binit;
    for (int ci = 0; ci < d.ci; ++ci) {
      const Scalar* xc = x + ((n * d.ci + ci) * (long long)d.h) * d.w;
      const Scalar* wc = w + ((co * d.ci + ci) * d.kh) * d.kw;
      for (int ky = 0; ky < d.kh; ++ky) {
        const int iy = oy * d.stride - d.pad + ky;
        if (iy < 0 || iy >= d.h) continue;
        const Scalar* xrow = xc + (long long)iy * d.w;
        for (int kx = 0; kx < d.kw; ++kx) {
          const Scalar wv = wc[ky * d.kw + kx];
          // valid ox range: 0 <= ox*stride - pad + kx < w
          int lo = 0, hi = wo;
          while (lo < hi && lo * d.stride - d.pad + kx < 0) ++lo;
          while (hi > lo && (hi - 1) * d.stride - d.pad + kx >= d.w) --hi;
          const Scalar* xoff = xrow - d.pad + kx;
          if (d.stride == 1) {
            for (int ox = lo; ox < hi; ++ox) yrow[ox] += wv * xoff[ox];
          } else {
            for (int ox = lo; ox < hi; ++ox) yrow[ox] += wv * xoff[ox * d.stride];
          }
        }
      }
    }
  }
}

void conv2d_bwd_data(const Scalar* gy, const Scalar* w, Scalar* gx, const ConvDims& d) {
  const int ho = d.ho(), wo = d.wo();
  const int rows = d.n * d.ci * d.h;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int iy = r % d.h;
    const int ci = (r / d.h) % d.ci;
    const int n = r / (d.h * d.ci);
    Scalar* grow = gx + (size_t)r * d.w;
    for (int ix = 0; ix < d.w; ++ix) grow[ix] = 0;
    for (int co = 0; co < d.co; ++co) {
      const Scalar* gc = gy + ((n * d.co + co) * (long long)ho) * wo;
      const Scalar* wc = w + ((co * d.ci + ci) * d.kh) * d.kw;
      for (int ky = 0; ky < d.kh; ++ky) {
        const int ty = iy + d.pad - ky;
        if (ty % d.stride != 0) continue;
        const int oy = ty / d.stride;
        if (oy < 0 || oy >= ho) continue;
        const Scalar* grow_y = gc + (long long)oy * wo;
        for (int kx = 0; kx < d.kw; ++kx) {
          const Scalar wv = wc[ky * d.kw + kx];
          // ix = ox*stride - pad + kx for ox in [lo, hi)
          int lo = 0, hi = wo;
          while (lo < hi && lo * d.stride - d.pad + kx < 0) ++lo;
          while (hi > lo && (hi - 1) * d.stride - d.pad + kx >= d.w) --hi;
          Scalar* goff = grow - d.pad + kx;
          if (d.stride == 1) {
            for (int ox = lo; ox < hi; ++ox) goff[ox] += wv * grow_y[ox];
          } else {
            for (int ox = lo; ox < hi; ++ox) goff[ox * d.stride] += wv * grow_y[ox];
          }
        }
      }
    }
  }
}

void conv2d_bwd_weights(const Scalar* x, const Scalar* gy, Scalar* gw, const ConvDims& d) {
  const int ho = d.ho(), wo = d.wo();
  const int cells = d.co * d.ci;
#pragma omp parallel for schedule(static)
  for (int cell = 0; cell < cells; ++cell) {
    const int ci = cell % d.ci;
    const int co = cell / d.ci;
    Scalar* wc = gw + (size_t)cell * d.kh * d.kw;
    for (int ky = 0; ky < d.kh; ++ky)
      for (int kx = 0; kx < d.kw; ++kx) {
        Scalar acc = 0;
        for (int n = 0; n < d.n; ++n) {
          const Scalar* gc = gy + ((n * d.co + co) * (long long)ho) * wo;
          const Scalar* xc = x + ((n * d.ci + ci) * (long long)d.h) * d.w;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * d.stride - d.pad + ky;
            if (iy < 0 || iy >= d.h) continue;
            const Scalar* grow = gc + (long long)oy * wo;
            const Scalar* xrow = xc + (long long)iy * d.w - d.pad + kx;
            int lo = 0, hi = wo;
            while (lo < hi && lo * d.stride - d.pad + kx < 0) ++lo;
            while (hi > lo && (hi - 1) * d.stride - d.pad + kx >= d.w) --hi;
            if (d.stride == 1) {
              for (int ox = lo; ox < hi; ++ox) acc += grow[ox] * xrow[ox];
            } else {
              for (int ox = lo; ox < hi; ++ox) acc += grow[ox] * xrow[ox * d.stride];
            }
          }
        }
        wc[ky * d.kw + kx] = acc;
      }
  }
}

void conv2d_bwd_bias(const Scalar* gy, Scalar* gb, int n, int co, int ho, int wo) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < co; ++c) {
    Scalar acc = 0;
    for (int i = 0; i < n; ++i) {
      const Scalar* gc = gy + ((i * co + c) * (long long)ho) * wo;
      for (long long p = 0; p < (long long)ho * wo; ++p) acc += gc[p];
    }
    gb[c] = acc;
  }
}

}  // namespace attnseg::kernels::omp
