#pragma once

#include "attnseg/tensor.hpp"

namespace attnseg::kernels {

// Which implementation the dispatch functions use. The serial backend is the
// naive reference; the openmp backend parallelizes over disjoint output
// elements with per-element accumulation in the same order as the reference,
// so both produce bit-identical results for any thread count.
enum class Backend { serial, openmp };

void set_backend(Backend b);
Backend backend();

// Thread cap for the openmp backend in the current thread (0 = library default).
void set_threads(int n);
int threads();

struct ConvDims {
  int n, ci, h, w;      // input
  int co, kh, kw;       // filter
  int stride, pad;
  int ho() const { return (h + 2 * pad - kh) / stride + 1; }
  int wo() const { return (w + 2 * pad - kw) / stride + 1; }
};

// Cross-correlation, Caffe/torch convention. w layout [co, ci, kh, kw].
// bias may be null.
void conv2d_fwd(const Scalar* x, const Scalar* w, const Scalar* bias, Scalar* y,
                const ConvDims& d);
// gx[n, ci, h, w] from gy[n, co, ho, wo]
void conv2d_bwd_data(const Scalar* gy, const Scalar* w, Scalar* gx, const ConvDims& d);
// gw[co, ci, kh, kw]; accumulated over n, ho, wo
void conv2d_bwd_weights(const Scalar* x, const Scalar* gy, Scalar* gw, const ConvDims& d);
void conv2d_bwd_bias(const Scalar* gy, Scalar* gb, int n, int co, int ho, int wo);

namespace ref {
void conv2d_fwd(const Scalar* x, const Scalar* w, const Scalar* bias, Scalar* y,
                const ConvDims& d);
void conv2d_bwd_data(const Scalar* gy, const Scalar* w, Scalar* gx, const ConvDims& d);
void conv2d_bwd_weights(const Scalar* x, const Scalar* gy, Scalar* gw, const ConvDims& d);
void conv2d_bwd_bias(const Scalar* gy, Scalar* gb, int n, int co, int ho, int wo);
}  // namespace ref

namespace omp {
void conv2d_fwd(const Scalar* x, const Scalar* w, const Scalar* bias, Scalar* y,
                const ConvDims& d);
void conv2d_bwd_data(const Scalar* gy, const Scalar* w, Scalar* gx, const ConvDims& d);
void conv2d_bwd_weights(const Scalar* x, const Scalar* gy, Scalar* gw, const ConvDims& d);
void conv2d_bwd_bias(const Scalar* gy, Scalar* gb, int n, int co, int ho, int wo);
}  // namespace omp

}  // namespace attnseg::kernels
