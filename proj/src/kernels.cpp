#include "attnseg/kernels.hpp"

#include <omp.h>

#include <atomic>

namespace attnseg::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::openmp};
thread_local int g_threads = 0;
}  // namespace

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }

void set_threads(int n) {
  g_threads = n;
  if (n > 0) omp_set_num_threads(n);
}
int threads() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

void conv2d_fwd(const Scalar* x, const Scalar* w, const Scalar* bias, Scalar* y,
                const ConvDims& d) {
  if (backend() == Backend::serial)
    ref::conv2d_fwd(x, w, bias, y, d);
  else
    omp::conv2d_fwd(x, w, bias, y, d);
}

void conv2d_bwd_data(const Scalar* gy, const Scalar* w, Scalar* gx, const ConvDims& d) {
  if (backend() == Backend::serial)
    ref::conv2d_bwd_data(gy, w, gx, d);
  else
    omp::conv2d_bwd_data(gy, w, gx, d);
}

void conv2d_bwd_weights(const Scalar* x, const Scalar* gy, Scalar* gw, const ConvDims& d) {
  if (backend() == Backend::serial)
    ref::conv2d_bwd_weights(x, gy, gw, d);
  else
    omp::conv2d_bwd_weights(x, gy, gw, d);
}

void conv2d_bwd_bias(const Scalar* gy, Scalar* gb, int n, int co, int ho, int wo) {
  if (backend() == Backend::serial)
    ref::conv2d_bwd_bias(gy, gb, n, co, ho, wo);
  else
    omp::conv2d_bwd_bias(gy, gb, n, co, ho, wo);
}

}  // namespace attnseg::kernels
