#pragma once

#include "snnkit/neurons.hpp"
#include "snnkit/ops.hpp"
#include "snnkit/tensor.hpp"

namespace snnkit {

enum class AttentionKind { kNone, kSpiking, kAnalog };

// Channel-then-spatial attention over an NCHW gate map. The spiking kind
// produces {0,1}-valued masks via the spike activation; the analog kind
// uses a logistic gate instead and exists for the ablation baseline.
struct CbamParams {
  Tensor w1;              // [C, Cr] shared MLP, pooled vector is right-multiplied
  Tensor w2;              // [Cr, C]
  Tensor spatial_kernel;  // [1, 2, 7, 7]
  Tensor spatial_bias;    // [1]
  AttentionKind kind = AttentionKind::kSpiking;
  SurrogateParams surrogate;
  double v_th = 1.0;
  SpikeMode mode = SpikeMode::kHard;

  std::int64_t channels() const { return w1.dim(0); }
  std::int64_t reduced() const { return w1.dim(1); }
};

// Parameters drawn uniform in +-1/sqrt(fan_in); biases start at zero.
// The reduced width is max(1, C / reduction_ratio).
CbamParams make_cbam(std::int64_t channels, std::int64_t reduction_ratio, AttentionKind kind,
                     Rng& rng, const SurrogateParams& surrogate = {}, double v_th = 1.0,
                     SpikeMode mode = SpikeMode::kHard);

// sigma(SMLP(avgpool(f)) + SMLP(maxpool(f))) -> [N,C,1,1].
Tensor channel_attention(const Tensor& f, const CbamParams& params);

// sigma(conv7x7([channel-mean(f); channel-max(f)])) -> [N,1,H,W].
Tensor spatial_attention(const Tensor& f, const CbamParams& params);

// Channel map applied first, spatial map second (order is load-bearing).
Tensor apply_cbam(const Tensor& f, const CbamParams& params);

}  // namespace snnkit
