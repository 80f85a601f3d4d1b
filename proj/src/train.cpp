#include "snnkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;

namespace snnkit {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<std::pair<std::string, Tensor>>& params, std::vector<Array>& grads,
            double lr) {
    if (m_.empty()) {
      for (auto& g : grads) {
        m_.push_back(Array::Zero(g.size()));
        v_.push_back(Array::Zero(g.size()));
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].square();
      params[i].second.raw() -= lr * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + eps_);
    }
  }

 private:
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Array> m_, v_;
};

// Global-norm clipping at 5 keeps the unrolled backward stable.
void clip_gradients(std::vector<Array>& grads, double max_norm = 5.0) {
  double sq = 0;
  for (const Array& g : grads) sq += g.square().sum();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (Array& g : grads) g *= s;
  }
}

double schedule_lr(const TrainConfig& tc, std::int64_t epoch) {
  switch (tc.lr_schedule) {
    case LrSchedule::kConstant:
      return tc.learning_rate;
    case LrSchedule::kStepDecay: {
      double lr = tc.learning_rate;
      if (epoch >= tc.epochs / 2) lr *= 0.1;
      if (epoch >= tc.epochs * 3 / 4) lr *= 0.1;
      return lr;
    }
    case LrSchedule::kWarmupLinearDecay: {
      const std::int64_t warm = std::max<std::int64_t>(1, tc.epochs / 20);
      if (epoch < warm) {
        return tc.learning_rate * static_cast<double>(epoch + 1) / static_cast<double>(warm);
      }
      const double remain = static_cast<double>(tc.epochs - epoch) /
                            static_cast<double>(std::max<std::int64_t>(1, tc.epochs - warm));
      return tc.learning_rate * remain;
    }
  }
  return tc.learning_rate;
}

std::string param_norm_report(std::vector<std::pair<std::string, Tensor>>& params) {
  std::ostringstream os;
  for (auto& [name, t] : params) {
    os << ' ' << name << "=" << std::sqrt(t.data().square().sum());
  }
  return os.str();
}

}  // namespace

Dataset bin_dataset(const EventDataset& events, std::int64_t t_steps, BinMode mode) {
  Dataset ds;
  ds.class_names = events.class_names;
  ds.frames.reserve(events.streams.size());
  for (std::size_t i = 0; i < events.streams.size(); ++i) {
    FrameSequence fs = bin_events(events.streams[i], t_steps, mode);
    ds.frames.push_back(fs.frames);
    ds.labels.push_back(events.labels[i]);
  }
  return ds;
}

void split_dataset(const Dataset& all, double val_fraction, Dataset& train_out, Dataset& val_out) {
  train_out = Dataset{{}, {}, all.class_names};
  val_out = Dataset{{}, {}, all.class_names};
  if (all.empty()) return;
  if (val_fraction <= 0) {
    train_out.frames = all.frames;
    train_out.labels = all.labels;
    return;
  }
  const std::int64_t stride = std::max<std::int64_t>(2, std::llround(1.0 / val_fraction));
  std::vector<std::int64_t> seen_per_class(
      *std::max_element(all.labels.begin(), all.labels.end()) + 1, 0);
  for (std::int64_t i = 0; i < all.size(); ++i) {
    const std::int64_t k = seen_per_class[all.labels[i]]++;
    Dataset& dst = (k % stride == stride - 1) ? val_out : train_out;
    dst.frames.push_back(all.frames[i]);
    dst.labels.push_back(all.labels[i]);
  }
}

Tensor batch_frames(const Dataset& ds, const std::vector<std::int64_t>& indices) {
  if (indices.empty()) throw ContractError("batch_frames requires at least one sample");
  const Shape& s = ds.frames[indices[0]].shape();  // [T,2,H,W]
  const std::int64_t t = s[0], h = s[2], w = s[3];
  const std::int64_t b = static_cast<std::int64_t>(indices.size());
  Tensor out = Tensor::zeros({t, b, 2, h, w});
  const std::int64_t plane = 2 * h * w;
  for (std::int64_t bi = 0; bi < b; ++bi) {
    if (!same_shape(ds.frames[indices[bi]].shape(), s)) {
      throw ContractError("batch_frames requires uniformly shaped samples");
    }
    const Array& src = ds.frames[indices[bi]].data();
    for (std::int64_t ti = 0; ti < t; ++ti) {
      std::copy_n(src.data() + ti * plane, plane, out.raw().data() + (ti * b + bi) * plane);
    }
  }
  return out;
}

std::vector<EpochStats> train(Model& model, const Dataset& train_set, const Dataset& val_set,
                              const TrainConfig& tc, const TrainOptions& options) {
  if (train_set.empty() || val_set.empty()) {
    throw ContractError("train requires non-empty train and validation sets");
  }
  if (tc.epochs < 1 || tc.batch_size < 1) {
    throw ContractError("train requires epochs >= 1 and batch_size >= 1");
  }
  // Config-file validation demands learning_rate > 0, but the loop itself
  // accepts 0 so a zero rate is an exact null update.
  auto params = model.parameters();
  Adam adam;
  std::vector<EpochStats> history;

  if (!options.out_dir.empty()) fs::create_directories(options.out_dir);

  for (std::int64_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = schedule_lr(tc, epoch);
    std::vector<std::int64_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(tc.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0;
    std::int64_t batches = 0, correct = 0;
    for (std::int64_t start = 0; start < train_set.size(); start += tc.batch_size) {
      const std::int64_t end = std::min<std::int64_t>(start + tc.batch_size, train_set.size());
      std::vector<std::int64_t> idx(order.begin() + start, order.begin() + end);
      Tensor frames = batch_frames(train_set, idx);
      std::vector<int> labels;
      labels.reserve(idx.size());
      for (std::int64_t i : idx) labels.push_back(train_set.labels[i]);

      Tape tape;
      for (auto& [name, t] : params) tape.watch(t);
      Tensor logits = forward(model, frames);
      Tensor loss = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(loss.value())) {
        throw NumericsError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                            std::to_string(batches) + "; parameter norms:" +
                            param_norm_report(params));
      }
      loss_sum += loss.value();
      const auto pred = argmax_rows(logits);
      for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == labels[i]) ++correct;
      }
      tape.backward(loss);
      std::vector<Array> grads;
      grads.reserve(params.size());
      for (auto& [name, t] : params) grads.push_back(tape.grad(t));
      clip_gradients(grads);
      adam.step(params, grads, lr);
      ++batches;
    }

    EpochStats st;
    st.epoch = epoch;
    st.loss = loss_sum / static_cast<double>(std::max<std::int64_t>(1, batches));
    st.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
    st.val_acc = evaluate(model, val_set, tc.batch_size).accuracy;
    history.push_back(st);
    if (options.verbose) {
      std::printf("epoch %3lld  loss %.5f  train %.3f  val %.3f  lr %.2e\n",
                  static_cast<long long>(epoch), st.loss, st.train_acc, st.val_acc, lr);
      std::fflush(stdout);
    }

    if (!options.out_dir.empty() && tc.checkpoint_every > 0 &&
        (epoch + 1) % tc.checkpoint_every == 0) {
      save_checkpoint(options.out_dir + "/checkpoint-" + std::to_string(epoch + 1), model,
                      CheckpointMeta{epoch, st.loss, st.train_acc, st.val_acc});
    }
    if (options.stop_at_val_acc >= 0 && st.val_acc >= options.stop_at_val_acc) break;
  }

  if (!options.out_dir.empty()) {
    const EpochStats& last = history.back();
    save_checkpoint(options.out_dir + "/checkpoint-final", model,
                    CheckpointMeta{last.epoch, last.loss, last.train_acc, last.val_acc});
    write_metrics_csv(options.out_dir + "/metrics.csv", history);
  }
  return history;
}

EvalResult evaluate(Model& model, const Dataset& test_set, std::int64_t batch_size) {
  if (test_set.empty()) throw ContractError("evaluate requires a non-empty dataset");
  const std::int64_t k = model.config.num_classes();
  for (int y : test_set.labels) {
    if (y < 0 || y >= k) {
      throw ContractError("dataset label " + std::to_string(y) + " outside the model's " +
                          std::to_string(k) + " classes");
    }
  }
  EvalResult r;
  r.confusion.assign(k, std::vector<std::int64_t>(k, 0));
  for (std::int64_t start = 0; start < test_set.size(); start += batch_size) {
    const std::int64_t end = std::min<std::int64_t>(start + batch_size, test_set.size());
    std::vector<std::int64_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Tensor logits = forward(model, batch_frames(test_set, idx));
    const auto pred = argmax_rows(logits);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      r.confusion[test_set.labels[idx[i]]][pred[i]]++;
    }
  }
  std::int64_t correct = 0;
  r.per_class_accuracy.assign(k, 0.0);
  for (std::int64_t c = 0; c < k; ++c) {
    std::int64_t row = 0;
    for (std::int64_t j = 0; j < k; ++j) row += r.confusion[c][j];
    correct += r.confusion[c][c];
    r.per_class_accuracy[c] = row > 0 ? static_cast<double>(r.confusion[c][c]) / row : 0.0;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(test_set.size());
  return r;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochStats>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << "epoch,loss,train_acc,val_acc\n";
  for (const EpochStats& st : history) {
    out << st.epoch << ',' << fmt_double(st.loss) << ',' << fmt_double(st.train_acc) << ','
        << fmt_double(st.val_acc) << '\n';
  }
}

std::vector<double> dump_features(Model& model, const Tensor& sample_frames,
                                  const std::vector<std::int64_t>& steps,
                                  const std::string& out_dir) {
  if (sample_frames.rank() != 5 || sample_frames.dim(1) != 1) {
    throw ContractError("dump_features expects one sample [T,1,2,H,W]");
  }
  for (std::int64_t s : steps) {
    if (s < 0 || s >= model.config.time_steps) {
      throw ContractError("requested step " + std::to_string(s) + " outside [0,T)");
    }
  }
  fs::create_directories(out_dir);
  const auto maps = hidden_maps(model, sample_frames);
  const std::int64_t ch = model.config.hidden_channels;
  const std::int64_t h = model.config.pooled_height(), w = model.config.pooled_width();

  std::ofstream csv(out_dir + "/features.csv", std::ios::trunc);
  csv << "step,channel,y,x,value\n";
  std::ofstream sparsity_csv(out_dir + "/sparsity.csv", std::ios::trunc);
  sparsity_csv << "step,sparsity\n";

  std::vector<double> sparsity;
  for (std::int64_t s : steps) {
    const Array& m = maps[s].data();  // [1,Ch,H,W]
    double lo = m.minCoeff(), hi = m.maxCoeff();
    const double span = hi > lo ? hi - lo : 1.0;
    std::int64_t zeros = 0;
    for (std::int64_t c = 0; c < ch; ++c) {
      std::ofstream pgm(out_dir + "/step" + std::to_string(s) + "_ch" + std::to_string(c) + ".pgm",
                        std::ios::trunc);
      pgm << "P2\n" << w << ' ' << h << "\n255\n";
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
          const double v = m[(c * h + y) * w + x];
          if (v == 0.0) ++zeros;
          // binary maps land exactly on 0 / 255
          const int px = static_cast<int>(std::lround((v - lo) / span * 255.0));
          pgm << px << (x + 1 == w ? '\n' : ' ');
          csv << s << ',' << c << ',' << y << ',' << x << ',' << fmt_double(v) << '\n';
        }
      }
    }
    const double frac = static_cast<double>(zeros) / static_cast<double>(ch * h * w);
    sparsity.push_back(frac);
    sparsity_csv << s << ',' << fmt_double(frac) << '\n';
  }
  return sparsity;
}

double mean_hidden_sparsity(Model& model, const Dataset& ds, std::int64_t max_samples) {
  const std::int64_t n = std::min<std::int64_t>(ds.size(), max_samples);
  if (n == 0) throw ContractError("mean_hidden_sparsity requires samples");
  std::vector<std::int64_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const auto maps = hidden_maps(model, batch_frames(ds, idx));
  std::int64_t zeros = 0, total = 0;
  for (const Tensor& m : maps) {
    for (Eigen::Index i = 0; i < m.data().size(); ++i) {
      if (m.data()[i] == 0.0) ++zeros;
    }
    total += m.size();
  }
  return static_cast<double>(zeros) / static_cast<double>(total);
}

std::vector<AblationRow> run_ablation(const ModelConfig& base, const TrainConfig& tc,
                                      const EventDataset& events, const std::string& out_csv,
                                      bool verbose) {
  struct Variant {
    std::string name;
    GateMask mask;
    AttentionKind kind;
    bool v_th_trainable;
    LifDynamics dynamics;
    std::int64_t time_steps;
  };
  // Gate-placement grid, the two trainable-threshold dynamics, then the
  // time-step sweep on the forget-gate configuration.
  const GateMask kF{true, false, false};
  std::vector<Variant> variants = {
      {"plain", GateMask{}, AttentionKind::kNone, false, base.lif_dynamics, base.time_steps},
      {"analog-cbam-f", kF, AttentionKind::kAnalog, false, base.lif_dynamics, base.time_steps},
      {"spiking-cbam-io", GateMask{false, true, true}, AttentionKind::kSpiking, false,
       base.lif_dynamics, base.time_steps},
      {"spiking-cbam-fio", GateMask{true, true, true}, AttentionKind::kSpiking, false,
       base.lif_dynamics, base.time_steps},
      {"spiking-cbam-f", kF, AttentionKind::kSpiking, false, base.lif_dynamics, base.time_steps},
      {"spiking-cbam-fi", GateMask{true, true, false}, AttentionKind::kSpiking, false,
       base.lif_dynamics, base.time_steps},
      {"spiking-cbam-i", GateMask{false, true, false}, AttentionKind::kSpiking, false,
       base.lif_dynamics, base.time_steps},
      {"trainable-vth-single-step", kF, AttentionKind::kSpiking, true, LifDynamics::kSingleStep,
       base.time_steps},
      {"trainable-vth-multi-step", kF, AttentionKind::kSpiking, true, LifDynamics::kMultiStep,
       base.time_steps},
      {"timesteps-10", kF, AttentionKind::kSpiking, false, base.lif_dynamics, 10},
      {"timesteps-15", kF, AttentionKind::kSpiking, false, base.lif_dynamics, 15},
      {"timesteps-20", kF, AttentionKind::kSpiking, false, base.lif_dynamics, 20},
      {"timesteps-25", kF, AttentionKind::kSpiking, false, base.lif_dynamics, 25},
  };

  std::vector<AblationRow> rows;
  for (const Variant& v : variants) {
    ModelConfig mc = base;
    mc.gate_mask = v.mask;
    mc.attention = v.kind;
    mc.v_th_trainable = v.v_th_trainable;
    mc.lif_dynamics = v.dynamics;
    mc.time_steps = v.time_steps;

    Dataset all = bin_dataset(events, mc.time_steps, mc.frame_mode);
    Dataset train_set, val_set;
    split_dataset(all, tc.val_fraction, train_set, val_set);

    TrainConfig run_tc = tc;
    run_tc.epochs = tc.ablate_epochs;
    run_tc.checkpoint_every = 0;

    Model model = build_model(mc, tc.seed);
    if (verbose) {
      std::printf("[ablate] %s (mask %s, %s, T=%lld)\n", v.name.c_str(),
                  gate_mask_str(mc.gate_mask).c_str(), attention_str(mc.attention).c_str(),
                  static_cast<long long>(mc.time_steps));
      std::fflush(stdout);
    }
    auto history = train(model, train_set, val_set, run_tc, TrainOptions{});
    const EpochStats& last = history.back();

    AblationRow row;
    row.name = v.name;
    row.gate_mask = gate_mask_str(mc.gate_mask);
    row.attention = attention_str(mc.attention);
    row.v_th_trainable = mc.v_th_trainable;
    row.lif_dynamics = lif_dynamics_str(mc.lif_dynamics);
    row.time_steps = mc.time_steps;
    row.epochs = run_tc.epochs;
    row.loss = last.loss;
    row.train_acc = last.train_acc;
    row.val_acc = last.val_acc;
    rows.push_back(row);
  }

  if (!out_csv.empty()) {
    fs::create_directories(fs::path(out_csv).parent_path());
    std::ofstream out(out_csv, std::ios::trunc);
    if (!out) throw DataError("cannot write " + out_csv);
    out << "name,gate_mask,attention,v_th_trainable,lif_dynamics,time_steps,epochs,loss,"
           "train_acc,val_acc\n";
    for (const AblationRow& r : rows) {
      out << r.name << ',' << r.gate_mask << ',' << r.attention << ','
          << (r.v_th_trainable ? "true" : "false") << ',' << r.lif_dynamics << ',' << r.time_steps
          << ',' << r.epochs << ',' << fmt_double(r.loss) << ',' << fmt_double(r.train_acc) << ','
          << fmt_double(r.val_acc) << '\n';
    }
  }
  return rows;
}

EventDataset make_synth_dataset(int classes, int samples_per_class, std::int64_t height,
                                std::int64_t width, std::int64_t duration_us, double noise_rate,
                                std::uint64_t seed) {
  if (classes < 1 || classes > kNumGestureClasses) {
    throw ContractError("classes must lie in [1," + std::to_string(kNumGestureClasses) + "]");
  }
  EventDataset ds;
  ds.sensor_width = width;
  ds.sensor_height = height;
  // class index = lexicographic order of class names, matching the on-disk
  // dataset layout contract
  std::vector<std::pair<std::string, int>> names;
  for (int c = 0; c < classes; ++c) names.emplace_back(gesture_class_name(c), c);
  std::sort(names.begin(), names.end());
  for (int ci = 0; ci < classes; ++ci) {
    ds.class_names.push_back(names[ci].first);
    for (int k = 0; k < samples_per_class; ++k) {
      EventStream s = synth_gesture(names[ci].second, seed * 1000003ull + k, height, width,
                                    duration_us, noise_rate);
      s.label = ci;
      ds.streams.push_back(std::move(s));
      ds.labels.push_back(ci);
    }
  }
  return ds;
}

}  // namespace snnkit
