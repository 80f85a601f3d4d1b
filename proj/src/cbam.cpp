#include "snnkit/cbam.hpp"

#include <cmath>

namespace snnkit {

CbamParams make_cbam(std::int64_t channels, std::int64_t reduction_ratio, AttentionKind kind,
                     Rng& rng, const SurrogateParams& surrogate, double v_th, SpikeMode mode) {
  if (channels < 1) throw ContractError("cbam channels must be >= 1");
  if (reduction_ratio < 1) throw ContractError("cbam reduction ratio must be >= 1");
  if (kind == AttentionKind::kNone) throw ContractError("cannot build an attention module of kind none");
  const std::int64_t reduced = std::max<std::int64_t>(1, channels / reduction_ratio);
  CbamParams p;
  const double s1 = 1.0 / std::sqrt(static_cast<double>(channels));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(reduced));
  const double s3 = 1.0 / std::sqrt(2.0 * 7.0 * 7.0);
  p.w1 = Tensor::uniform({channels, reduced}, rng, -s1, s1, true);
  p.w2 = Tensor::uniform({reduced, channels}, rng, -s2, s2, true);
  p.spatial_kernel = Tensor::uniform({1, 2, 7, 7}, rng, -s3, s3, true);
  p.spatial_bias = Tensor::zeros({1}, true);
  p.kind = kind;
  p.surrogate = surrogate;
  p.v_th = v_th;
  p.mode = mode;
  return p;
}

namespace {

Tensor activation(const Tensor& x, const CbamParams& p) {
  return p.kind == AttentionKind::kSpiking ? spike(x, p.v_th, p.surrogate, p.mode) : logistic(x);
}

// Shared two-layer perceptron on pooled channel descriptors [N,C].
Tensor smlp(const Tensor& v, const CbamParams& p) {
  Tensor hidden = matmul(v, p.w1);
  hidden = p.kind == AttentionKind::kSpiking ? spike(hidden, p.v_th, p.surrogate, p.mode)
                                             : relu(hidden);
  return matmul(hidden, p.w2);
}

}  // namespace

Tensor channel_attention(const Tensor& f, const CbamParams& params) {
  if (f.rank() != 4) throw ContractError("channel_attention expects [N,C,H,W]");
  const std::int64_t n = f.dim(0), c = f.dim(1);
  if (c != params.channels()) {
    throw ContractError("channel_attention channel mismatch: input C=" + std::to_string(c) +
                        ", params C=" + std::to_string(params.channels()));
  }
  Tensor avg = reshape(pool_spatial(f, PoolMode::kAvg), {n, c});
  Tensor mx = reshape(pool_spatial(f, PoolMode::kMax), {n, c});
  Tensor pre = add(smlp(avg, params), smlp(mx, params));
  return reshape(activation(pre, params), {n, c, 1, 1});
}

Tensor spatial_attention(const Tensor& f, const CbamParams& params) {
  if (f.rank() != 4) throw ContractError("spatial_attention expects [N,C,H,W]");
  Tensor pooled = pool_channel(f);  // [N,2,H,W]
  Tensor pre = conv2d(pooled, params.spatial_kernel, params.spatial_bias, 3, 3);
  return activation(pre, params);
}

Tensor apply_cbam(const Tensor& f, const CbamParams& params) {
  Tensor mc = channel_attention(f, params);
  Tensor refined = mul(f, mc);
  Tensor ms = spatial_attention(refined, params);
  return mul(refined, ms);
}

}  // namespace snnkit
