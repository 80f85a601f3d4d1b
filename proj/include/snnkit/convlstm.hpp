#pragma once

#include <optional>
#include <utility>

#include "snnkit/cbam.hpp"
#include "snnkit/neurons.hpp"
#include "snnkit/tensor.hpp"

namespace snnkit {

// Which gates the attention module modulates. All-false is the plain
// spiking ConvLSTM.
struct GateMask {
  bool f = false;
  bool i = false;
  bool o = false;
  bool any() const { return f || i || o; }
};

// Gate kernels are fused into one convolution over [x_t ; h_{t-1}] that
// yields 4*hidden_channels maps, split in gate order f, i, g, o. This is
// arithmetically identical to eight separate per-gate convolutions.
struct ConvLstmParams {
  Tensor w;  // [4*Ch, Cin+Ch, k, k]
  Tensor b;  // [4*Ch]
  std::int64_t input_channels = 0;
  std::int64_t hidden_channels = 0;
  std::int64_t kernel_size = 0;
  double v_th1 = 1.0;  // f, i, o gates and the hidden binarization
  double v_th2 = 1.0;  // g gate
  SurrogateParams surrogate;
  SpikeMode mode = SpikeMode::kHard;
  // When true, h_t = o_t (.) c_t is emitted raw instead of being passed
  // through the spike activation, so hidden states become real-valued.
  bool raw_hidden = false;
};

struct ConvLstmState {
  Tensor h;  // [N,Ch,H,W], {0,1}-valued unless raw_hidden
  Tensor c;  // [N,Ch,H,W]
};

ConvLstmParams make_convlstm(std::int64_t input_channels, std::int64_t hidden_channels,
                             std::int64_t kernel_size, Rng& rng,
                             const SurrogateParams& surrogate = {}, double v_th1 = 1.0,
                             double v_th2 = 1.0, SpikeMode mode = SpikeMode::kHard,
                             bool raw_hidden = false);

ConvLstmState zero_state(const ConvLstmParams& params, std::int64_t batch, std::int64_t height,
                         std::int64_t width);

// Post-attention gate values of one step, for diagnostics and the spiking
// contract checks.
struct StepTrace {
  Tensor f, i, g, o, c;
};

// One recurrence step. Gates with an active mask flag are refined by the
// attention module before they act on the cell state. `attention` must be
// non-null exactly when the mask has any true flag.
std::pair<Tensor, ConvLstmState> convlstm_step(const Tensor& x, const ConvLstmState& state,
                                               const ConvLstmParams& params, const GateMask& mask,
                                               const CbamParams* attention,
                                               StepTrace* trace = nullptr);

// Unrolls convlstm_step over frames [T,N,Cin,H,W] on one tape, enabling
// backpropagation through all T steps. Returns the stacked hidden maps
// [T,N,Ch,H,W] and the final state.
std::pair<Tensor, ConvLstmState> unroll(const Tensor& frames, const ConvLstmParams& params,
                                        const GateMask& mask, const CbamParams* attention,
                                        const ConvLstmState& init);

}  // namespace snnkit
