#include "attnseg/nn.hpp"

#include <cmath>

namespace attnseg::nn {

Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const Scalar bound = std::sqrt(6.0 / (Scalar)fan_in);
  for (long long i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

Conv2d::Conv2d(int ci, int co, int k, int stride_, int pad_, Rng& rng)
    : w(uniform_init({co, ci, k, k}, ci * k * k, rng), true),
      b(Tensor::zeros({co}), true) {
  stride = stride_;
  pad = pad_;
}

void Conv2d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
}

ConvTranspose2d::ConvTranspose2d(int ci, int co, int k, int stride_, int pad_, Rng& rng)
    : w(uniform_init({ci, co, k, k}, ci * k * k, rng), true),
      b(Tensor::zeros({co}), true) {
  stride = stride_;
  pad = pad_;
}

void ConvTranspose2d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
}

Linear::Linear(int in, int out, Rng& rng)
    : w(uniform_init({out, in}, in, rng), true), b(Tensor::zeros({out}), true) {}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
}

InstanceNorm::InstanceNorm(int channels)
    : gamma(Tensor::full({channels}, 1.0), true), beta(Tensor::zeros({channels}), true) {}

Var InstanceNorm::operator()(const Var& x) const {
  const auto& s = x.value().shape();
  const int N = s[0], H = s[2], W = s[3];
  Var m = ops::mean_hw(x);
  Var xc = ops::sub(x, ops::broadcast_hw(m, H, W));
  Var v = ops::mean_hw(ops::mul(xc, xc));
  Var inv = ops::pow_scalar(ops::add_scalar(v, eps), -0.5);
  Var xn = ops::scale_channels(xc, inv);
  return ops::add(ops::mul(xn, ops::broadcast_chan(gamma, N, H, W)),
                  ops::broadcast_chan(beta, N, H, W));
}

void InstanceNorm::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

}  // namespace attnseg::nn
