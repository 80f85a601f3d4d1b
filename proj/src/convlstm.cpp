#include "snnkit/convlstm.hpp"

#include <cmath>
#include <vector>

namespace snnkit {

ConvLstmParams make_convlstm(std::int64_t input_channels, std::int64_t hidden_channels,
                             std::int64_t kernel_size, Rng& rng, const SurrogateParams& surrogate,
                             double v_th1, double v_th2, SpikeMode mode, bool raw_hidden) {
  if (input_channels < 1 || hidden_channels < 1) {
    throw ContractError("convlstm channel counts must be >= 1");
  }
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ContractError("convlstm kernel size must be odd and >= 1");
  }
  ConvLstmParams p;
  const std::int64_t fan_in = (input_channels + hidden_channels) * kernel_size * kernel_size;
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  p.w = Tensor::uniform({4 * hidden_channels, input_channels + hidden_channels, kernel_size,
                         kernel_size},
                        rng, -s, s, true);
  p.b = Tensor::zeros({4 * hidden_channels}, true);
  p.input_channels = input_channels;
  p.hidden_channels = hidden_channels;
  p.kernel_size = kernel_size;
  p.v_th1 = v_th1;
  p.v_th2 = v_th2;
  p.surrogate = surrogate;
  p.mode = mode;
  p.raw_hidden = raw_hidden;
  return p;
}

ConvLstmState zero_state(const ConvLstmParams& params, std::int64_t batch, std::int64_t height,
                         std::int64_t width) {
  Shape s{batch, params.hidden_channels, height, width};
  return ConvLstmState{Tensor::zeros(s), Tensor::zeros(s)};
}

std::pair<Tensor, ConvLstmState> convlstm_step(const Tensor& x, const ConvLstmState& state,
                                               const ConvLstmParams& params, const GateMask& mask,
                                               const CbamParams* attention, StepTrace* trace) {
  if (mask.any() && attention == nullptr) {
    throw ConfigError("gate mask requests attention but no attention module was provided");
  }
  if (x.rank() != 4) throw ContractError("convlstm_step expects x [N,Cin,H,W]");
  if (x.dim(1) != params.input_channels) {
    throw ContractError("convlstm_step input channels " + std::to_string(x.dim(1)) +
                        " do not match params Cin=" + std::to_string(params.input_channels));
  }
  if (x.dim(0) != state.h.dim(0) || x.dim(2) != state.h.dim(2) || x.dim(3) != state.h.dim(3)) {
    throw ContractError("convlstm_step state shape " + shape_str(state.h.shape()) +
                        " does not match input " + shape_str(x.shape()));
  }

  const std::int64_t ch = params.hidden_channels;
  const std::int64_t pad = (params.kernel_size - 1) / 2;
  Tensor xh = concat_channels(x, state.h);
  Tensor pre = conv2d(xh, params.w, params.b, pad, pad);

  Tensor f = spike(slice_channels(pre, 0, ch), params.v_th1, params.surrogate, params.mode);
  Tensor i = spike(slice_channels(pre, ch, 2 * ch), params.v_th1, params.surrogate, params.mode);
  Tensor g = spike(slice_channels(pre, 2 * ch, 3 * ch), params.v_th2, params.surrogate, params.mode);
  Tensor o = spike(slice_channels(pre, 3 * ch, 4 * ch), params.v_th1, params.surrogate, params.mode);

  if (mask.f) f = apply_cbam(f, *attention);
  if (mask.i) i = apply_cbam(i, *attention);
  if (mask.o) o = apply_cbam(o, *attention);

  Tensor c = add(mul(f, state.c), mul(i, g));
  Tensor h = mul(o, c);
  if (!params.raw_hidden) h = spike(h, params.v_th1, params.surrogate, params.mode);
  if (trace) *trace = StepTrace{f, i, g, o, c};
  return {h, ConvLstmState{h, c}};
}

std::pair<Tensor, ConvLstmState> unroll(const Tensor& frames, const ConvLstmParams& params,
                                        const GateMask& mask, const CbamParams* attention,
                                        const ConvLstmState& init) {
  if (frames.rank() != 5) throw ContractError("unroll expects frames [T,N,Cin,H,W]");
  const std::int64_t t_steps = frames.dim(0);
  if (t_steps < 1) throw ContractError("unroll requires T >= 1");
  ConvLstmState state = init;
  std::vector<Tensor> hidden;
  hidden.reserve(t_steps);
  for (std::int64_t t = 0; t < t_steps; ++t) {
    auto [h, next] = convlstm_step(slice_leading(frames, t), state, params, mask, attention);
    hidden.push_back(std::move(h));
    state = std::move(next);
  }
  return {stack_leading(hidden), state};
}

}  // namespace snnkit
