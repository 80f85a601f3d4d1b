#pragma once

#include <utility>
#include <vector>

#include "snnkit/ops.hpp"
#include "snnkit/tensor.hpp"

namespace snnkit {

// Smoothness of the surrogate derivative used in the backward pass.
struct SurrogateParams {
  double alpha = 4.0;
};

// Forward semantics of the spike nonlinearity. Hard is the production mode
// (Heaviside forward, surrogate backward). Smooth replaces the forward by
// the surrogate primitive itself, making the whole network differentiable
// so gradients can be validated against finite differences.
enum class SpikeMode { kHard, kSmooth };

// Surrogate primitive g(x) = (1 - erf(-alpha x)) / 2 and its derivative
// g'(x) = alpha / sqrt(pi) * exp(-alpha^2 x^2).
double surrogate_cdf(double x, double alpha);
double surrogate_pdf(double x, double alpha);

// Spike activation on a pre-thresholded argument x = u - v_th.
// Hard forward: 1 where x >= 0, else 0. Backward multiplies the upstream
// gradient by g'(x) in both modes.
Tensor spike_from_diff(const Tensor& x, const SurrogateParams& params,
                       SpikeMode mode = SpikeMode::kHard);

// Spike activation with a threshold tensor (scalar or broadcastable to u).
// Gradients flow to both u and v_th via the u - v_th difference.
Tensor spike(const Tensor& u, const Tensor& v_th, const SurrogateParams& params,
             SpikeMode mode = SpikeMode::kHard);
Tensor spike(const Tensor& u, double v_th, const SurrogateParams& params,
             SpikeMode mode = SpikeMode::kHard);

// Leaky integrate-and-fire population state. The membrane tensor u carries
// across steps; v_th may be a scalar tensor with requires_grad for the
// trainable-threshold mode.
struct LifState {
  Tensor u;
  double tau = 2.0;
  Tensor v_th;
  double u_reset = 0.0;
};

LifState make_lif_state(Shape shape, double tau, double v_th, double u_reset = 0.0);

// One Euler step with unit dt: u <- u + (1/tau)(-u + I), then fire and
// hard-reset fired neurons to u_reset. In hard mode the reset branch is
// detached so gradients flow only through the spike path.
std::pair<Tensor, LifState> lif_step(const LifState& state, const Tensor& input_current,
                                     const SurrogateParams& params,
                                     SpikeMode mode = SpikeMode::kHard);

// Integrate without firing: the membrane readout used by classifier heads.
LifState lif_integrate(const LifState& state, const Tensor& input_current);

// Sequential lif_step over the leading time axis of inputs [T, ...].
// Bitwise identical to folding lif_step by hand.
std::pair<Tensor, LifState> lif_multistep(const LifState& state, const Tensor& inputs,
                                          const SurrogateParams& params,
                                          SpikeMode mode = SpikeMode::kHard);

}  // namespace snnkit
