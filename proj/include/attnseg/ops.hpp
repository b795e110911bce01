#pragma once

#include "attnseg/autodiff.hpp"

// Differentiable tensor ops. Network tensors are NCHW rank-4; vectors going
// through the channel-attention perceptron are [N, C]; losses reduce to [1].
namespace attnseg::ops {

// elementwise, same shape
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var add_scalar(const Var& a, Scalar s);
Var mul_scalar(const Var& a, Scalar s);
Var pow_scalar(const Var& a, Scalar p);

Var exp_(const Var& a);
Var log_(const Var& a);
Var abs_(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, Scalar slope);
Var sigmoid(const Var& a);

// reductions / broadcasts
Var sum_all(const Var& a);   // -> [1]
Var mean_all(const Var& a);  // -> [1]
Var mean_hw(const Var& a);   // [N,C,H,W] -> [N,C]
Var sum_hw(const Var& a);    // [N,C,H,W] -> [N,C]
Var max_hw(const Var& a);    // [N,C,H,W] -> [N,C]
Var broadcast_hw(const Var& a, int h, int w);        // [N,C] -> [N,C,H,W]
Var broadcast_chan(const Var& p, int n, int h, int w);  // [C] -> [N,C,H,W]
Var sum_channels(const Var& a);  // [N,C,H,W] -> [N,1,H,W]

// gating
Var scale_channels(const Var& f, const Var& gate);   // gate [N,C]
Var scale_spatial(const Var& f, const Var& map);     // map [N,1,H,W]

Var softmax_channels(const Var& a);  // per-pixel over C
Var concat_channels(const Var& a, const Var& b);

Var linear(const Var& x, const Var& w, const Var& b);  // x[N,C], w[D,C], b[D]

// conv, cross-correlation, w[co,ci,kh,kw]; b may be undefined Var
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
// transposed conv, w[ci,co,kh,kw]
Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad);

Var reflect_pad2d(const Var& x, int p);  // symmetric reflection, needs p <= min(H,W)
Var nearest_upsample2x(const Var& x);
Var reshape(const Var& x, std::vector<int> shape);

}  // namespace attnseg::ops
