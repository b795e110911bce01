#pragma once

#include <string>
#include <vector>

#include "attnseg/ops.hpp"
#include "attnseg/rng.hpp"

namespace attnseg::nn {

struct NamedParam {
  std::string name;
  Var var;
};

using ParamList = std::vector<NamedParam>;

// fan-in scaled uniform init, biases zero
Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng);

struct Conv2d {
  Var w, b;
  int stride = 1, pad = 0;

  Conv2d() = default;
  Conv2d(int ci, int co, int k, int stride, int pad, Rng& rng);

  Var operator()(const Var& x) const { return ops::conv2d(x, w, b, stride, pad); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct ConvTranspose2d {
  Var w, b;  // w [ci, co, kh, kw]
  int stride = 2, pad = 1;

  ConvTranspose2d() = default;
  ConvTranspose2d(int ci, int co, int k, int stride, int pad, Rng& rng);

  Var operator()(const Var& x) const {
    return ops::conv_transpose2d(x, w, b, stride, pad);
  }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct Linear {
  Var w, b;  // w [D, C]

  Linear() = default;
  Linear(int in, int out, Rng& rng);

  Var operator()(const Var& x) const { return ops::linear(x, w, b); }
  void collect(const std::string& prefix, ParamList& out) const;
};

// Per-(sample, channel) normalization over the spatial extent with learned
// per-channel affine.
struct InstanceNorm {
  Var gamma, beta;
  Scalar eps = 1e-5;

  InstanceNorm() = default;
  explicit InstanceNorm(int channels);

  Var operator()(const Var& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

}  // namespace attnseg::nn
