#pragma once

#include "texpro/tensor/tensor.hpp"

namespace texpro::tc {

// Elementwise with scalar broadcast: shapes must match, or either operand
// may be a single-element tensor.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor pow(const Tensor& base, const Tensor& exponent);

// Differentiable soft clamp: lo + (hi-lo) * sigmoid(x). Maps the whole real
// line into (lo, hi) so range enforcement never zeroes gradients.
Tensor clamp_smooth(const Tensor& x, double lo, double hi);
double squash(double u, double lo, double hi);
double unsquash(double v, double lo, double hi);

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

Tensor matmul(const Tensor& a, const Tensor& b);  // {m,k} x {k,n} -> {m,n}

// Zero-padded "same" convolution, stride 1. img {C,H,W}, kernel {O,C,kh,kw}
// with odd kh, kw -> {O,H,W}.
Tensor conv2d(const Tensor& img, const Tensor& kernel);

// Pixel-center bilinear resample of {C,H,W} to {C,oh,ow}.
Tensor bilinear_resize(const Tensor& img, int oh, int ow);

Tensor spatial_mean(const Tensor& img);      // {C,H,W} -> {C}
Tensor spatial_variance(const Tensor& img);  // {C,H,W} -> {C}, population

// Channel Gram matrix: {C,H,W} -> {C,C}, entries (1/HW) * F F^T.
Tensor gram(const Tensor& img);

// Space-to-channel rearrangement: {C,H,W} -> {C*r*r, H/r, W/r}.
Tensor pixel_unshuffle(const Tensor& img, int r);

// Plumbing (not part of the numeric vocabulary): shape change and single
// element extraction, both with pass-through gradients.
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor gather(const Tensor& x, int64_t index);  // -> {1}

// Mean over every element -> {1}.
Tensor mean_all(const Tensor& x);

// Extension point for module-local fused operations (shading, noise fields,
// loss kernels). fwd fills out->data from inputs; bwd scatters out->grad.
Tensor custom_op(const char* name, std::vector<Tensor> inputs, std::vector<int> out_shape,
                 std::function<void(const TapeNode&)> fwd,
                 std::function<void(const TapeNode&)> bwd);

}  // namespace texpro::tc
