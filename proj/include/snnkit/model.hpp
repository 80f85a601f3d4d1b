#pragma once

#include <string>
#include <utility>
#include <vector>

#include "snnkit/config.hpp"
#include "snnkit/convlstm.hpp"

namespace snnkit {

// One fully-connected spiking layer: current = v * w + b, then LIF.
struct FcLayer {
  Tensor w;     // [in, out]
  Tensor b;     // [1, out]
  Tensor v_th;  // scalar, requires_grad in the trainable-threshold mode
};

// pool -> spiking ConvLSTM (+ optional gate attention) -> spiking MLP head.
struct Model {
  ModelConfig config;
  ConvLstmParams cell;
  bool has_attention = false;
  CbamParams attention;
  std::vector<FcLayer> fc;

  // Stable name -> tensor registry used by the optimizer and checkpoints.
  std::vector<std::pair<std::string, Tensor>> parameters();
  std::int64_t parameter_count();
};

// Deterministic initialization from the seed. attention = none coerces the
// gate mask to all-false; an all-false mask builds no attention module, so
// such a model is bitwise identical to one configured with attention = none.
Model build_model(const ModelConfig& config, std::uint64_t seed);

// frames [T,N,2,H,W] -> logits [N,K]. Frames are block-pooled and
// re-binarized before entering the recurrence; that stage is input
// preprocessing and carries no gradient.
Tensor forward(Model& model, const Tensor& frames);

// Hidden spike maps h_t for one forward pass, untracked; used by the
// feature-map dump and sparsity reports.
std::vector<Tensor> hidden_maps(Model& model, const Tensor& frames);

}  // namespace snnkit
