// Naive serial reference kernels. Kept deliberately simple; the unit tests
// compare the openmp kernels against these, and the benchmark tool measures
// the gap.

#include "attnseg/kernels.hpp"

namespace attnseg::kernels::ref {

void conv2d_fwd(const Scalar* x, const Scalar* w, const Scalar* bias, Scalar* y,
                const ConvDims& d) {
  const int ho = d.ho(), wo = d.wo();
  for (int n = 0; n < d.n; ++n)
    for (int co = 0; co < d.co; ++co)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          Scalar acc = bias ? bias[co] : Scalar(0);
          for (int ci = 0; ci < d.ci; ++ci)
            for (int ky = 0; ky < d.kh; ++ky)
              for (int kx = 0; kx < d.kw; ++kx) {
                int iy = oy * d.stride - d.pad + ky;
                int ix = ox * d.stride - d.pad + kx;
                if (iy < 0 || iy >= d.h || ix < 0 || ix >= d.w) continue;
                acc += w[((co * d.ci + ci) * d.kh + ky) * d.kw + kx] *
                       x[((n * d.ci + ci) * (long long)d.h + iy) * d.w + ix];
              }
          y[((n * d.co + co) * (long long)ho + oy) * wo + ox] = acc;
        }
}

void conv2d_bwd_data(const Scalar* gy, const Scalar* w, Scalar* gx, const ConvDims& d) {
  const int ho = d.ho(), wo = d.wo();
  for (int n = 0; n < d.n; ++n)
    for (int ci = 0; ci < d.ci; ++ci)
      for (int iy = 0; iy < d.h; ++iy)
        for (int ix = 0; ix < d.w; ++ix) {
          Scalar acc = 0;
          for (int co = 0; co < d.co; ++co)
            for (int ky = 0; ky < d.kh; ++ky)
              for (int kx = 0; kx < d.kw; ++kx) {
                int ty = iy + d.pad - ky;
                int tx = ix + d.pad - kx;
                if (ty % d.stride != 0 || tx % d.stride != 0) continue;
                int oy = ty / d.stride, ox = tx / d.stride;
                if (oy < 0 || oy >= ho || ox < 0 || ox >= wo) continue;
                acc += w[((co * d.ci + ci) * d.kh + ky) * d.kw + kx] *
                       gy[((n * d.co + co) * (long long)ho + oy) * wo + ox];
              }
          gx[((n * d.ci + ci) * (long long)d.h + iy) * d.w + ix] = acc;
        }
}

void conv2d_bwd_weights(const Scalar* x, const Scalar* gy, Scalar* gw, const ConvDims& d) {
  const int ho = d.ho(), wo = d.wo();
  for (int co = 0; co < d.co; ++co)
    for (int ci = 0; ci < d.ci; ++ci)
      for (int ky = 0; ky < d.kh; ++ky)
        for (int kx = 0; kx < d.kw; ++kx) {
          Scalar acc = 0;
          for (int n = 0; n < d.n; ++n)
            for (int oy = 0; oy < ho; ++oy)
              for (int ox = 0; ox < wo; ++ox) {
                int iy = oy * d.stride - d.pad + ky;
                int ix = ox * d.stride - d.pad + kx;
                if (iy < 0 || iy >= d.h || ix < 0 || ix >= d.w) continue;
                acc += gy[((n * d.co + co) * (long long)ho + oy) * wo + ox] *
                       x[((n * d.ci + ci) * (long long)d.h + iy) * d.w + ix];
              }
          gw[((co * d.ci + ci) * d.kh + ky) * d.kw + kx] = acc;
        }
}

void conv2d_bwd_bias(const Scalar* gy, Scalar* gb, int n, int co, int ho, int wo) {
  for (int c = 0; c < co; ++c) {
    Scalar acc = 0;
    for (int i = 0; i < n; ++i)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox)
          acc += gy[((i * co + c) * (long long)ho + oy) * wo + ox];
    gb[c] = acc;
  }
}

}  // namespace attnseg::kernels::ref
