#pragma once

#include "bcr/tensor.hpp"

namespace bcr {

// Differentiable tensor operations. Every op computes its forward value,
// validates finiteness, and records a backward closure when any input is
// attached to a tape. Inputs are never mutated.

// Elementwise; operands must have identical shapes, or one may be a
// single-element tensor which broadcasts against the other.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double c);   // a * c
Tensor add_c(const Tensor& a, double c);   // a + c

Tensor neg(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor logit(const Tensor& a);  // inverse sigmoid; domain error unless values in (0,1)
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// Shape manipulation.
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a, const std::vector<int>& perm);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int start, int len);
// Gathers rows along axis 0; backward scatter-adds into the source rows.
Tensor gather_rows(const Tensor& a, const std::vector<int>& rows);

// Reductions. The axis overloads drop the reduced axis.
Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, int axis);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, int axis);

// Batched matrix product: [.., m, k] x [.., k, n] -> [.., m, n]. Leading
// batch dimensions must match, or either operand may be rank 2 and is then
// broadcast across the other's batch.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor softmax(const Tensor& a, int axis);

// Normalizes over the last axis; gamma/beta are 1-D of that length.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Adds a vector over the last axis.
Tensor add_bias(const Tensor& x, const Tensor& b);

// 2-D convolution, x: [Cin,H,W], w: [Cout,Cin,kh,kw], b: [Cout]. SAME
// padding; output spatial size is ceil(in/stride). stride must be 1 or 2.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride);

// 2x2 max pooling with stride 2; spatial dims must be even.
Tensor max_pool2d(const Tensor& x);

Tensor upsample_nearest(const Tensor& x, int factor);

// Samples map [C,H,W] at fractional normalized coords [P,2] ((x,y) order,
// texel center of (r,c) at ((c+0.5)/W, (r+0.5)/H)). Coordinates outside the
// image clamp to the border texel centers; differentiable in both map and
// coords (coord gradient is zero in the clamped region).
Tensor bilinear_sample(const Tensor& map, const Tensor& coords);

// Sinusoidal encoding of 2-D points, coords [...,2] -> [...,dim]. dim must
// be divisible by 4. Per axis value v, with half = dim/2:
//   enc[2j]   = sin(2*pi*v * T^(-2j/half))
//   enc[2j+1] = cos(2*pi*v * T^(-2j/half)),  j = 0..half/2-1
// x encoding first, then y.
Tensor positional_encoding(const Tensor& coords, int dim, double temperature = 10000.0);

}  // namespace bcr
