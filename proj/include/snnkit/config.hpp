#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "snnkit/aer.hpp"
#include "snnkit/cbam.hpp"
#include "snnkit/convlstm.hpp"

namespace snnkit {

enum class Readout { kSpikeCount, kMembrane };
enum class LifDynamics { kSingleStep, kMultiStep };
enum class LrSchedule { kConstant, kStepDecay, kWarmupLinearDecay };

// Full architecture description: pooling front end, spiking ConvLSTM with
// optional gate attention, fully-connected spiking classifier.
// Note: tau defaults to 2.0; the reference experiments also quote 4.0 in
// prose, so the value is exposed here rather than hard-coded.
struct ModelConfig {
  std::int64_t input_height = 128;
  std::int64_t input_width = 128;
  std::int64_t pool_factor = 4;
  std::int64_t hidden_channels = 8;
  std::int64_t kernel_size = 3;
  GateMask gate_mask{true, false, false};
  AttentionKind attention = AttentionKind::kSpiking;
  std::int64_t reduction_ratio = 16;
  std::vector<std::int64_t> fc_layers{128, 64, 11};
  std::int64_t time_steps = 20;
  double tau = 2.0;
  double alpha = 4.0;
  double v_th = 1.0;
  double u_reset = 0.0;
  bool v_th_trainable = false;
  bool raw_hidden = false;
  Readout readout = Readout::kSpikeCount;
  LifDynamics lif_dynamics = LifDynamics::kSingleStep;
  BinMode frame_mode = BinMode::kBinary;
  // Not a config-file key: smooth forward used by gradient-check harnesses.
  SpikeMode spike_mode = SpikeMode::kHard;

  std::int64_t num_classes() const { return fc_layers.back(); }
  std::int64_t pooled_height() const { return input_height / pool_factor; }
  std::int64_t pooled_width() const { return input_width / pool_factor; }
};

struct TrainConfig {
  std::int64_t epochs = 200;
  std::int64_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;
  LrSchedule lr_schedule = LrSchedule::kConstant;
  std::int64_t checkpoint_every = 0;  // 0 = final checkpoint only
  double val_fraction = 0.2;
  std::int64_t ablate_epochs = 20;
};

// Flat key = value text, '#' comments, unknown keys are hard errors.
// Missing keys keep the defaults above.
std::pair<ModelConfig, TrainConfig> parse_config(const std::string& text);

// Applies a single "key=value" override (the CLI --set flag).
void apply_override(ModelConfig& mc, TrainConfig& tc, const std::string& key,
                    const std::string& value);

void validate(const ModelConfig& mc);
void validate(const TrainConfig& tc);

// Canonical serialization (stable key order); reparses to itself.
std::string serialize_config(const ModelConfig& mc, const TrainConfig& tc);

// FNV-1a hash of the model part of the canonical serialization; pins
// checkpoints to the architecture they were trained with.
std::uint64_t config_hash(const ModelConfig& mc);

std::string gate_mask_str(const GateMask& m);
std::string attention_str(AttentionKind k);
std::string lif_dynamics_str(LifDynamics d);

}  // namespace snnkit
