#include "snnkit/model.hpp"

#include <cmath>

namespace snnkit {

std::vector<std::pair<std::string, Tensor>> Model::parameters() {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("convlstm.w", cell.w);
  out.emplace_back("convlstm.b", cell.b);
  if (has_attention) {
    out.emplace_back("cbam.w1", attention.w1);
    out.emplace_back("cbam.w2", attention.w2);
    out.emplace_back("cbam.spatial_w", attention.spatial_kernel);
    out.emplace_back("cbam.spatial_b", attention.spatial_bias);
  }
  for (std::size_t i = 0; i < fc.size(); ++i) {
    const std::string prefix = "fc" + std::to_string(i);
    out.emplace_back(prefix + ".w", fc[i].w);
    out.emplace_back(prefix + ".b", fc[i].b);
    if (config.v_th_trainable) out.emplace_back(prefix + ".v_th", fc[i].v_th);
  }
  return out;
}

std::int64_t Model::parameter_count() {
  std::int64_t n = 0;
  for (auto& [name, t] : parameters()) n += t.size();
  return n;
}

Model build_model(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  Model m;
  m.config = config;
  if (m.config.attention == AttentionKind::kNone) {
    m.config.gate_mask = GateMask{};  // attention none forces an all-false mask
  }

  Rng rng(seed);
  const SurrogateParams sp{m.config.alpha};
  m.cell = make_convlstm(2, m.config.hidden_channels, m.config.kernel_size, rng, sp,
                         m.config.v_th, m.config.v_th, m.config.spike_mode, m.config.raw_hidden);

  m.has_attention = m.config.attention != AttentionKind::kNone && m.config.gate_mask.any();
  if (m.has_attention) {
    m.attention = make_cbam(m.config.hidden_channels, m.config.reduction_ratio,
                            m.config.attention, rng, sp, m.config.v_th, m.config.spike_mode);
  }

  std::int64_t in_width =
      m.config.hidden_channels * m.config.pooled_height() * m.config.pooled_width();
  for (std::int64_t width : m.config.fc_layers) {
    FcLayer layer;
    const double s = 1.0 / std::sqrt(static_cast<double>(in_width));
    layer.w = Tensor::uniform({in_width, width}, rng, -s, s, true);
    layer.b = Tensor::zeros({1, width}, true);
    layer.v_th = Tensor::scalar(m.config.v_th, m.config.v_th_trainable);
    m.fc.push_back(std::move(layer));
    in_width = width;
  }
  return m;
}

namespace {

void check_frames(const Model& m, const Tensor& frames) {
  if (frames.rank() != 5 || frames.dim(2) != 2) {
    throw ContractError("forward expects frames [T,N,2,H,W], got " + shape_str(frames.shape()));
  }
  if (frames.dim(0) != m.config.time_steps || frames.dim(3) != m.config.input_height ||
      frames.dim(4) != m.config.input_width) {
    throw ContractError("frame shape " + shape_str(frames.shape()) +
                        " does not match configured T/H/W");
  }
}

// Per-step input currents of one fc layer for the whole sequence.
std::vector<Tensor> layer_currents(const std::vector<Tensor>& inputs, const FcLayer& layer) {
  std::vector<Tensor> out;
  out.reserve(inputs.size());
  for (const Tensor& v : inputs) out.push_back(add(matmul(v, layer.w), layer.b));
  return out;
}

}  // namespace

Tensor forward(Model& m, const Tensor& frames) {
  check_frames(m, frames);
  const std::int64_t t_steps = frames.dim(0);
  const std::int64_t batch = frames.dim(1);
  const std::int64_t ph = m.config.pooled_height(), pw = m.config.pooled_width();
  const SurrogateParams sp{m.config.alpha};

  Tensor pooled = pool_frames(frames, m.config.pool_factor);
  ConvLstmState init = zero_state(m.cell, batch, ph, pw);
  auto [h_seq, final_state] =
      unroll(pooled, m.cell, m.config.gate_mask, m.has_attention ? &m.attention : nullptr, init);

  const std::int64_t flat = m.config.hidden_channels * ph * pw;
  std::vector<Tensor> activ;
  activ.reserve(t_steps);
  for (std::int64_t t = 0; t < t_steps; ++t) {
    activ.push_back(reshape(slice_leading(h_seq, t), {batch, flat}));
  }

  const std::size_t last = m.fc.size() - 1;
  const bool membrane = m.config.readout == Readout::kMembrane;

  if (m.config.lif_dynamics == LifDynamics::kMultiStep) {
    // Layer-by-layer propagation: each layer consumes the full spike
    // sequence of the previous one through lif_multistep.
    for (std::size_t l = 0; l < m.fc.size(); ++l) {
      std::vector<Tensor> currents = layer_currents(activ, m.fc[l]);
      LifState st{Tensor::zeros({batch, m.fc[l].w.dim(1)}), m.config.tau, m.fc[l].v_th,
                  m.config.u_reset};
      if (l == last && membrane) {
        for (const Tensor& cur : currents) st = lif_integrate(st, cur);
        return st.u;
      }
      auto [spike_seq, fs] = lif_multistep(st, stack_leading(currents), sp, m.config.spike_mode);
      activ.clear();
      for (std::int64_t t = 0; t < t_steps; ++t) activ.push_back(slice_leading(spike_seq, t));
    }
    Tensor logits = activ[0];
    for (std::int64_t t = 1; t < t_steps; ++t) logits = add(logits, activ[t]);
    return logits;
  }

  // Single-step dynamics: step all layers together once per time step.
  std::vector<LifState> states;
  for (auto& layer : m.fc) {
    states.push_back(LifState{Tensor::zeros({batch, layer.w.dim(1)}), m.config.tau, layer.v_th,
                              m.config.u_reset});
  }
  Tensor counts;
  for (std::int64_t t = 0; t < t_steps; ++t) {
    Tensor v = activ[t];
    for (std::size_t l = 0; l < m.fc.size(); ++l) {
      Tensor cur = add(matmul(v, m.fc[l].w), m.fc[l].b);
      if (l == last && membrane) {
        states[l] = lif_integrate(states[l], cur);
        break;
      }
      auto [s, next] = lif_step(states[l], cur, sp, m.config.spike_mode);
      states[l] = next;
      v = s;
    }
    if (!membrane) counts = counts.defined() ? add(counts, v) : v;
  }
  return membrane ? states[last].u : counts;
}

std::vector<Tensor> hidden_maps(Model& m, const Tensor& frames) {
  check_frames(m, frames);
  const std::int64_t batch = frames.dim(1);
  Tensor pooled = pool_frames(frames, m.config.pool_factor);
  ConvLstmState state = zero_state(m.cell, batch, m.config.pooled_height(), m.config.pooled_width());
  std::vector<Tensor> maps;
  maps.reserve(frames.dim(0));
  for (std::int64_t t = 0; t < frames.dim(0); ++t) {
    auto [h, next] = convlstm_step(slice_leading(pooled, t), state, m.cell, m.config.gate_mask,
                                   m.has_attention ? &m.attention : nullptr);
    maps.push_back(h);
    state = next;
  }
  return maps;
}

}  // namespace snnkit
