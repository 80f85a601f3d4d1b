// Command-line front end: train / eval / ablate / dump-features / synth-data.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "snnkit/checkpoint.hpp"
#include "snnkit/config.hpp"
#include "snnkit/train.hpp"

namespace fs = std::filesystem;
using namespace snnkit;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string data_root;
  std::string out_dir;
  std::int64_t seed = -1;  // -1: keep config value
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_data) {
  cmd->add_option("--config", args.config_path, "config file (flat key = value, # comments)");
  auto* data = cmd->add_option("--data", args.data_root, "dataset root: <root>/<class>/<sample>.aer");
  if (needs_data) data->required();
  cmd->add_option("--out", args.out_dir, "output directory (all artifacts land here)")->required();
  cmd->add_option("--seed", args.seed, "seed override");
  cmd->add_option("--set", args.overrides, "config override key=value (repeatable)");
}

std::pair<ModelConfig, TrainConfig> load_config(const CommonArgs& args) {
  std::string text;
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw ConfigError("cannot open config file " + args.config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  auto [mc, tc] = parse_config(text);
  for (const std::string& kv : args.overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_override(mc, tc, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.seed >= 0) tc.seed = static_cast<std::uint64_t>(args.seed);
  validate(mc);
  validate(tc);
  return {mc, tc};
}

Dataset load_binned(const CommonArgs& args, const ModelConfig& mc) {
  EventDataset events = load_event_dataset(args.data_root, mc.input_width, mc.input_height);
  if (static_cast<std::int64_t>(events.class_names.size()) != mc.num_classes()) {
    throw ConfigError("dataset has " + std::to_string(events.class_names.size()) +
                      " classes but fc_layers ends with " + std::to_string(mc.num_classes()) +
                      "; override with --set fc_layers=...");
  }
  return bin_dataset(events, mc.time_steps, mc.frame_mode);
}

int cmd_train(const CommonArgs& args) {
  auto [mc, tc] = load_config(args);
  Dataset all = load_binned(args, mc);
  Dataset train_set, val_set;
  split_dataset(all, tc.val_fraction, train_set, val_set);
  if (val_set.empty()) val_set = train_set;  // tiny datasets: validate on train
  Model model = build_model(mc, tc.seed);
  TrainOptions opts;
  opts.out_dir = args.out_dir;
  opts.verbose = true;
  auto history = train(model, train_set, val_set, tc, opts);
  const EpochStats& last = history.back();
  std::printf("final: epoch %lld loss %.5f train_acc %.4f val_acc %.4f\n",
              static_cast<long long>(last.epoch), last.loss, last.train_acc, last.val_acc);
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& ckpt) {
  auto [mc, tc] = load_config(args);
  Dataset test_set = load_binned(args, mc);
  Model model = build_model(mc, tc.seed);
  load_checkpoint(ckpt, model);
  EvalResult r = evaluate(model, test_set, tc.batch_size);
  fs::create_directories(args.out_dir);
  std::ofstream out(args.out_dir + "/eval.csv", std::ios::trunc);
  out << "class,accuracy\n";
  for (std::size_t c = 0; c < r.per_class_accuracy.size(); ++c) {
    out << test_set.class_names[c] << ',' << r.per_class_accuracy[c] << '\n';
  }
  std::ofstream conf(args.out_dir + "/confusion.csv", std::ios::trunc);
  for (const auto& row : r.confusion) {
    for (std::size_t j = 0; j < row.size(); ++j) conf << row[j] << (j + 1 == row.size() ? '\n' : ',');
  }
  std::printf("accuracy %.4f over %lld samples\n", r.accuracy,
              static_cast<long long>(test_set.size()));
  return 0;
}

int cmd_ablate(const CommonArgs& args) {
  auto [mc, tc] = load_config(args);
  EventDataset events = load_event_dataset(args.data_root, mc.input_width, mc.input_height);
  if (static_cast<std::int64_t>(events.class_names.size()) != mc.num_classes()) {
    throw ConfigError("dataset has " + std::to_string(events.class_names.size()) +
                      " classes but fc_layers ends with " + std::to_string(mc.num_classes()));
  }
  fs::create_directories(args.out_dir);
  auto rows = run_ablation(mc, tc, events, args.out_dir + "/ablation.csv", true);
  std::printf("%-28s %-5s %-8s %-6s  val_acc\n", "name", "mask", "attn", "T");
  for (const AblationRow& r : rows) {
    std::printf("%-28s %-5s %-8s %-6lld  %.4f\n", r.name.c_str(), r.gate_mask.c_str(),
                r.attention.c_str(), static_cast<long long>(r.time_steps), r.val_acc);
  }
  return 0;
}

int cmd_dump_features(const CommonArgs& args, const std::string& ckpt, std::int64_t sample,
                      std::string steps_arg) {
  auto [mc, tc] = load_config(args);
  Dataset ds = load_binned(args, mc);
  if (sample < 0 || sample >= ds.size()) {
    throw DataError("sample index " + std::to_string(sample) + " outside dataset of size " +
                    std::to_string(ds.size()));
  }
  Model model = build_model(mc, tc.seed);
  if (!ckpt.empty()) load_checkpoint(ckpt, model);

  std::vector<std::int64_t> steps;
  if (steps_arg.empty()) {
    for (std::int64_t s : {0, 5, 10, 15, 19}) {
      if (s < mc.time_steps) steps.push_back(s);
    }
    if (steps.empty()) steps = {0, mc.time_steps - 1};
  } else {
    std::stringstream ss(steps_arg);
    std::string item;
    while (std::getline(ss, item, ',')) steps.push_back(std::stoll(item));
  }

  Tensor frames = batch_frames(ds, {sample});
  auto sparsity = dump_features(model, frames, steps, args.out_dir);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    std::printf("step %lld sparsity %.4f\n", static_cast<long long>(steps[i]), sparsity[i]);
  }
  return 0;
}

int cmd_synth_data(const std::string& out_dir, int classes, int samples, std::int64_t height,
                   std::int64_t width, std::int64_t duration, double noise, std::int64_t seed) {
  if (classes < 1 || classes > kNumGestureClasses) {
    throw ConfigError("--classes must lie in [1," + std::to_string(kNumGestureClasses) + "]");
  }
  if (samples < classes) throw ConfigError("--samples must be >= --classes");
  const int per_class = samples / classes;
  for (int c = 0; c < classes; ++c) {
    const fs::path dir = fs::path(out_dir) / gesture_class_name(c);
    fs::create_directories(dir);
    const int extra = c < samples % classes ? 1 : 0;
    for (int k = 0; k < per_class + extra; ++k) {
      EventStream s = synth_gesture(c, static_cast<std::uint64_t>(seed) * 1000003ull + k, height,
                                    width, duration, noise);
      char name[32];
      std::snprintf(name, sizeof(name), "%04d.aer", k);
      write_event_file((dir / name).string(), s);
    }
  }
  std::printf("wrote %d classes under %s\n", classes, out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spiking ConvLSTM with gate attention: training and data tools"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, ablate_args, dump_args;
  std::string eval_ckpt, dump_ckpt, dump_steps;
  std::int64_t dump_sample = 0;

  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write metrics/checkpoints");
  add_common(train_cmd, train_args, true);

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(eval_cmd, eval_args, true);
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint base path (without .manifest/.bin)")
      ->required();

  CLI::App* ablate_cmd = app.add_subcommand(
      "ablate", "run the gate/attention, threshold and time-step ablation grid");
  add_common(ablate_cmd, ablate_args, true);

  CLI::App* dump_cmd = app.add_subcommand("dump-features", "write hidden-map images and sparsity");
  add_common(dump_cmd, dump_args, true);
  dump_cmd->add_option("--ckpt", dump_ckpt, "checkpoint base path (fresh init when omitted)");
  dump_cmd->add_option("--sample", dump_sample, "dataset sample index")->capture_default_str();
  dump_cmd->add_option("--steps", dump_steps, "comma-separated time steps (default 0,5,10,15,19)");

  std::string synth_out;
  int synth_classes = 4, synth_samples = 64;
  std::int64_t synth_h = 16, synth_w = 16, synth_duration = 100000, synth_seed = 7;
  double synth_noise = 0.0;
  CLI::App* synth_cmd = app.add_subcommand("synth-data", "generate a synthetic gesture dataset");
  synth_cmd->add_option("--out", synth_out, "output dataset root")->required();
  synth_cmd->add_option("--classes", synth_classes, "number of gesture classes (max 8)")
      ->capture_default_str();
  synth_cmd->add_option("--samples", synth_samples, "total sample count")->capture_default_str();
  synth_cmd->add_option("--height", synth_h, "sensor height")->capture_default_str();
  synth_cmd->add_option("--width", synth_w, "sensor width")->capture_default_str();
  synth_cmd->add_option("--duration", synth_duration, "stream duration in microseconds")
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth_noise, "noise events per microsecond")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed, "generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // exits 0 with full flag/default listing
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args, eval_ckpt);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_args);
    if (dump_cmd->parsed()) return cmd_dump_features(dump_args, dump_ckpt, dump_sample, dump_steps);
    if (synth_cmd->parsed()) {
      return cmd_synth_data(synth_out, synth_classes, synth_samples, synth_h, synth_w,
                            synth_duration, synth_noise, synth_seed);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericsError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
