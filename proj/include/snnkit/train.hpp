#pragma once

#include <string>
#include <vector>

#include "snnkit/aer.hpp"
#include "snnkit/checkpoint.hpp"
#include "snnkit/model.hpp"

namespace snnkit {

// Binned samples ready for batching.
struct Dataset {
  std::vector<Tensor> frames;  // each [T,2,H,W]
  std::vector<int> labels;
  std::vector<std::string> class_names;

  bool empty() const { return frames.empty(); }
  std::int64_t size() const { return static_cast<std::int64_t>(frames.size()); }
};

Dataset bin_dataset(const EventDataset& events, std::int64_t t_steps, BinMode mode);

// Deterministic split: within each class, samples keep their load order
// (lexicographic file names) and every round(1/val_fraction)-th sample goes
// to validation. Independent of the training seed.
void split_dataset(const Dataset& all, double val_fraction, Dataset& train_out, Dataset& val_out);

// Stacks the selected samples into [T,B,2,H,W].
Tensor batch_frames(const Dataset& ds, const std::vector<std::int64_t>& indices);

struct EpochStats {
  std::int64_t epoch = 0;
  double loss = 0;
  double train_acc = 0;
  double val_acc = 0;
};

struct TrainOptions {
  std::string out_dir;          // empty: write no files
  double stop_at_val_acc = -1;  // stop early once val accuracy reaches this; < 0 disables
  bool verbose = false;
};

// BPTT with Adam (beta1 0.9, beta2 0.999, eps 1e-8), softmax cross-entropy,
// per-epoch shuffling seeded by (seed, epoch), gradient clipping at global
// norm 5. Writes metrics.csv and checkpoints under out_dir when set.
// Non-finite losses abort with a NumericsError carrying a parameter-norm
// report.
std::vector<EpochStats> train(Model& model, const Dataset& train_set, const Dataset& val_set,
                              const TrainConfig& tc, const TrainOptions& options = {});

struct EvalResult {
  double accuracy = 0;
  std::vector<double> per_class_accuracy;
  std::vector<std::vector<std::int64_t>> confusion;  // [true][predicted]
};

EvalResult evaluate(Model& model, const Dataset& test_set, std::int64_t batch_size = 32);

void write_metrics_csv(const std::string& path, const std::vector<EpochStats>& history);

// Writes per-channel portable graymaps plus a CSV of raw values and a
// per-step sparsity table for the requested time steps of one sample.
// Returns the per-step sparsity (fraction of zeros).
std::vector<double> dump_features(Model& model, const Tensor& sample_frames,
                                  const std::vector<std::int64_t>& steps,
                                  const std::string& out_dir);

// Mean fraction of zeros in the hidden maps over (up to) max_samples.
double mean_hidden_sparsity(Model& model, const Dataset& ds, std::int64_t max_samples = 16);

struct AblationRow {
  std::string name;
  std::string gate_mask;
  std::string attention;
  bool v_th_trainable = false;
  std::string lif_dynamics;
  std::int64_t time_steps = 0;
  std::int64_t epochs = 0;
  double loss = 0;
  double train_acc = 0;
  double val_acc = 0;
};

// Gate-placement grid (7 configurations), the two trainable-threshold
// dynamics, and the time-step sweep {10,15,20,25}, each trained for
// tc.ablate_epochs on the given events. Writes one consolidated CSV when
// out_csv is non-empty.
std::vector<AblationRow> run_ablation(const ModelConfig& base, const TrainConfig& tc,
                                      const EventDataset& events, const std::string& out_csv,
                                      bool verbose = false);

// In-memory synthetic gesture dataset; sample seeds derive from (seed,
// class, index).
EventDataset make_synth_dataset(int classes, int samples_per_class, std::int64_t height,
                                std::int64_t width, std::int64_t duration_us, double noise_rate,
                                std::uint64_t seed);

}  // namespace snnkit
