#pragma once

#include <vector>

#include "snnkit/tensor.hpp"

namespace snnkit {

// Elementwise arithmetic with broadcasting over equal-rank shapes: two
// dimensions are compatible when they are equal or one of them is 1.
// Gradients of broadcast operands are reduced back to their own shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor logistic(const Tensor& a);

// Same values, no tape link; gradients do not flow through.
Tensor detach(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor sum(const Tensor& a);  // -> [1]

// a: [M,K], b: [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);

// Cross-correlation with zero padding, stride 1.
// input: [N,Cin,H,W], kernel: [Cout,Cin,Kh,Kw] (Kh,Kw odd), bias: [Cout].
// Output spatial size: H + 2*pad_h - Kh + 1 by W + 2*pad_w - Kw + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::int64_t pad_h, std::int64_t pad_w);

enum class PoolMode { kAvg, kMax };

// Global spatial reduction per channel: [N,C,H,W] -> [N,C,1,1].
// Max mode backpropagates to the first argmax in row-major order.
Tensor pool_spatial(const Tensor& input, PoolMode mode);

// Per-pixel reduction across channels: [N,C,H,W] -> [N,2,H,W]
// (slice 0 = mean, slice 1 = max; first argmax on ties).
Tensor pool_channel(const Tensor& input);

// NCHW channel-axis concatenation/slicing.
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& a, std::int64_t c0, std::int64_t c1);

// Leading-axis indexing/stacking, e.g. one time step out of [T,...].
Tensor slice_leading(const Tensor& a, std::int64_t t);
Tensor stack_leading(const std::vector<Tensor>& parts);

// Mean softmax cross-entropy over the batch. logits: [N,K], labels in [0,K).
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Row-wise argmax with ties broken to the lowest index. logits: [N,K].
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace snnkit
