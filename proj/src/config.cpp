#include "snnkit/config.hpp"

#include <cctype>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

namespace snnkit {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse integer from '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse number from '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

GateMask parse_gate_mask(const std::string& key, const std::string& v) {
  if (v.size() != 3 || v.find_first_not_of("01") != std::string::npos) {
    throw ConfigError("config key '" + key + "': gate mask must be three 0/1 flags (f,i,o), got '" +
                      v + "'");
  }
  return GateMask{v[0] == '1', v[1] == '1', v[2] == '1'};
}

std::vector<std::int64_t> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<std::int64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

using Setter = std::function<void(ModelConfig&, TrainConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& key_table() {
  static const std::map<std::string, Setter> table = {
      {"input_height", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.input_height = parse_int(k, v); }},
      {"input_width", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.input_width = parse_int(k, v); }},
      {"pool_factor", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.pool_factor = parse_int(k, v); }},
      {"hidden_channels", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.hidden_channels = parse_int(k, v); }},
      {"kernel_size", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.kernel_size = parse_int(k, v); }},
      {"gate_mask", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.gate_mask = parse_gate_mask(k, v); }},
      {"attention", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) {
         if (v == "none") m.attention = AttentionKind::kNone;
         else if (v == "spiking") m.attention = AttentionKind::kSpiking;
         else if (v == "analog") m.attention = AttentionKind::kAnalog;
         else throw ConfigError("config key '" + k + "': expected none|spiking|analog, got '" + v + "'");
       }},
      {"reduction_ratio", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.reduction_ratio = parse_int(k, v); }},
      {"fc_layers", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.fc_layers = parse_int_list(k, v); }},
      {"time_steps", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.time_steps = parse_int(k, v); }},
      {"tau", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.tau = parse_double(k, v); }},
      {"alpha", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.alpha = parse_double(k, v); }},
      {"v_th", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.v_th = parse_double(k, v); }},
      {"u_reset", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.u_reset = parse_double(k, v); }},
      {"v_th_trainable", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.v_th_trainable = parse_bool(k, v); }},
      {"raw_hidden", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) { m.raw_hidden = parse_bool(k, v); }},
      {"readout", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) {
         if (v == "spike_count") m.readout = Readout::kSpikeCount;
         else if (v == "membrane") m.readout = Readout::kMembrane;
         else throw ConfigError("config key '" + k + "': expected spike_count|membrane, got '" + v + "'");
       }},
      {"lif_dynamics", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) {
         if (v == "single_step") m.lif_dynamics = LifDynamics::kSingleStep;
         else if (v == "multi_step") m.lif_dynamics = LifDynamics::kMultiStep;
         else throw ConfigError("config key '" + k + "': expected single_step|multi_step, got '" + v + "'");
       }},
      {"frame_mode", [](ModelConfig& m, TrainConfig&, const std::string& k, const std::string& v) {
         if (v == "binary") m.frame_mode = BinMode::kBinary;
         else if (v == "count") m.frame_mode = BinMode::kCount;
         else throw ConfigError("config key '" + k + "': expected binary|count, got '" + v + "'");
       }},
      {"epochs", [](ModelConfig&, TrainConfig& t, const std::string& k, const std::string& v) { t.epochs = parse_int(k, v); }},
      {"batch_size", [](ModelConfig&, TrainConfig& t, const std::string& k, const std::string& v) { t.batch_size = parse_int(k, v); }},
      {"learning_rate", [](ModelConfig&, TrainConfig& t, const std::string& k, const std::string& v) { t.learning_rate = parse_double(k, v); }},
      {"seed", [](ModelConfig&, TrainConfig& t, const std::string& k, const std::string& v) { t.seed = static_cast<std::uint64_t>(parse_int(k, v)); }},
      {"lr_schedule", [](ModelConfig&, TrainConfig& t, const std::string& k, const std::string& v) {
         if (v == "constant") t.lr_schedule = LrSchedule::kConstant;
         else if (v == "step_decay") t.lr_schedule = LrSchedule::kStepDecay;
         else if (v == "warmup_linear_decay") t.lr_schedule = LrSchedule::kWarmupLinearDecay;
         else throw ConfigError("config key '" + k + "': expected constant|step_decay|warmup_linear_decay, got '" + v + "'");
       }},
      {"checkpoint_every", [](ModelConfig&, TrainConfig& t, const std::string& k, const std::string& v) { t.checkpoint_every = parse_int(k, v); }},
      {"val_fraction", [](ModelConfig&, TrainConfig& t, const std::string& k, const std::string& v) { t.val_fraction = parse_double(k, v); }},
      {"ablate_epochs", [](ModelConfig&, TrainConfig& t, const std::string& k, const std::string& v) { t.ablate_epochs = parse_int(k, v); }},
  };
  return table;
}

}  // namespace

std::string gate_mask_str(const GateMask& m) {
  std::string s = "000";
  if (m.f) s[0] = '1';
  if (m.i) s[1] = '1';
  if (m.o) s[2] = '1';
  return s;
}

std::string attention_str(AttentionKind k) {
  switch (k) {
    case AttentionKind::kNone: return "none";
    case AttentionKind::kSpiking: return "spiking";
    case AttentionKind::kAnalog: return "analog";
  }
  return "none";
}

std::string lif_dynamics_str(LifDynamics d) {
  return d == LifDynamics::kSingleStep ? "single_step" : "multi_step";
}

void apply_override(ModelConfig& mc, TrainConfig& tc, const std::string& key,
                    const std::string& value) {
  const auto& table = key_table();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(mc, tc, key, value);
}

std::pair<ModelConfig, TrainConfig> parse_config(const std::string& text) {
  ModelConfig mc;
  TrainConfig tc;
  std::istringstream in(text);
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + " is not key = value: '" + line + "'");
    }
    apply_override(mc, tc, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  validate(mc);
  validate(tc);
  return {mc, tc};
}

void validate(const ModelConfig& mc) {
  if (mc.input_height < 1 || mc.input_width < 1) throw ConfigError("input size must be >= 1");
  if (mc.pool_factor < 1) throw ConfigError("pool_factor must be >= 1");
  if (mc.input_height % mc.pool_factor != 0 || mc.input_width % mc.pool_factor != 0) {
    throw ConfigError("pool_factor " + std::to_string(mc.pool_factor) + " does not divide input " +
                      std::to_string(mc.input_height) + "x" + std::to_string(mc.input_width));
  }
  if (mc.hidden_channels < 1) throw ConfigError("hidden_channels must be >= 1");
  if (mc.kernel_size < 1 || mc.kernel_size % 2 == 0) throw ConfigError("kernel_size must be odd");
  if (mc.fc_layers.empty()) throw ConfigError("fc_layers must be non-empty");
  for (std::int64_t wdt : mc.fc_layers) {
    if (wdt < 1) throw ConfigError("fc layer widths must be >= 1");
  }
  if (mc.time_steps < 1) throw ConfigError("time_steps must be >= 1");
  if (!(mc.tau > 0)) throw ConfigError("tau must be > 0");
  if (!(mc.alpha > 0)) throw ConfigError("alpha must be > 0");
  if (mc.reduction_ratio < 1) throw ConfigError("reduction_ratio must be >= 1");
}

void validate(const TrainConfig& tc) {
  if (tc.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (tc.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(tc.learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (tc.checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (tc.val_fraction < 0 || tc.val_fraction >= 1) throw ConfigError("val_fraction must be in [0,1)");
  if (tc.ablate_epochs < 1) throw ConfigError("ablate_epochs must be >= 1");
}

std::string serialize_config(const ModelConfig& mc, const TrainConfig& tc) {
  std::ostringstream os;
  os << "ablate_epochs = " << tc.ablate_epochs << '\n';
  os << "alpha = " << fmt_double(mc.alpha) << '\n';
  os << "attention = " << attention_str(mc.attention) << '\n';
  os << "batch_size = " << tc.batch_size << '\n';
  os << "checkpoint_every = " << tc.checkpoint_every << '\n';
  os << "epochs = " << tc.epochs << '\n';
  os << "fc_layers = ";
  for (std::size_t i = 0; i < mc.fc_layers.size(); ++i) {
    if (i) os << ',';
    os << mc.fc_layers[i];
  }
  os << '\n';
  os << "frame_mode = " << (mc.frame_mode == BinMode::kBinary ? "binary" : "count") << '\n';
  os << "gate_mask = " << gate_mask_str(mc.gate_mask) << '\n';
  os << "hidden_channels = " << mc.hidden_channels << '\n';
  os << "input_height = " << mc.input_height << '\n';
  os << "input_width = " << mc.input_width << '\n';
  os << "kernel_size = " << mc.kernel_size << '\n';
  os << "learning_rate = " << fmt_double(tc.learning_rate) << '\n';
  os << "lif_dynamics = " << lif_dynamics_str(mc.lif_dynamics) << '\n';
  os << "lr_schedule = "
     << (tc.lr_schedule == LrSchedule::kConstant
             ? "constant"
             : tc.lr_schedule == LrSchedule::kStepDecay ? "step_decay" : "warmup_linear_decay")
     << '\n';
  os << "pool_factor = " << mc.pool_factor << '\n';
  os << "raw_hidden = " << (mc.raw_hidden ? "true" : "false") << '\n';
  os << "readout = " << (mc.readout == Readout::kSpikeCount ? "spike_count" : "membrane") << '\n';
  os << "reduction_ratio = " << mc.reduction_ratio << '\n';
  os << "seed = " << tc.seed << '\n';
  os << "tau = " << fmt_double(mc.tau) << '\n';
  os << "time_steps = " << mc.time_steps << '\n';
  os << "u_reset = " << fmt_double(mc.u_reset) << '\n';
  os << "v_th = " << fmt_double(mc.v_th) << '\n';
  os << "v_th_trainable = " << (mc.v_th_trainable ? "true" : "false") << '\n';
  os << "val_fraction = " << fmt_double(tc.val_fraction) << '\n';
  return os.str();
}

std::uint64_t config_hash(const ModelConfig& mc) {
  // model-affecting keys only, canonical order
  std::ostringstream os;
  os << mc.input_height << '|' << mc.input_width << '|' << mc.pool_factor << '|'
     << mc.hidden_channels << '|' << mc.kernel_size << '|' << gate_mask_str(mc.gate_mask) << '|'
     << attention_str(mc.attention) << '|' << mc.reduction_ratio << '|';
  for (std::int64_t w : mc.fc_layers) os << w << ',';
  os << '|' << mc.time_steps << '|' << fmt_double(mc.tau) << '|' << fmt_double(mc.alpha) << '|'
     << fmt_double(mc.v_th) << '|' << fmt_double(mc.u_reset) << '|' << mc.v_th_trainable << '|'
     << mc.raw_hidden << '|' << static_cast<int>(mc.readout) << '|'
     << static_cast<int>(mc.lif_dynamics) << '|' << static_cast<int>(mc.frame_mode);
  const std::string s = os.str();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace snnkit
