// End-to-end smoke tests of the command-line tool. ctest passes the binary
// path as the first argument.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_root;

int run(const std::string& args, const std::string& log_name = "") {
  std::string cmd = g_cli + " " + args;
  if (!log_name.empty()) {
    cmd += " > " + (g_root / log_name).string() + " 2>&1";
  } else {
    cmd += " > /dev/null 2>&1";
  }
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_desk_config(const fs::path& path, const std::string& extra = "") {
  std::ofstream out(path);
  out << "input_height = 16\ninput_width = 16\npool_factor = 2\nhidden_channels = 8\n"
         "gate_mask = 100\nattention = spiking\nfc_layers = 32,4\ntime_steps = 10\n"
         "alpha = 2.0\nv_th = 0.1\nepochs = 4\nbatch_size = 8\nlearning_rate = 0.002\n"
         "seed = 3\nval_fraction = 0.25\n"
      << extra;
}

}  // namespace

TEST_CASE("help exits zero and lists the flags") {
  CHECK(run("--help", "help.txt") == 0);
  const std::string text = slurp(g_root / "help.txt");
  for (const char* word : {"train", "eval", "ablate", "dump-features", "synth-data"}) {
    CHECK(text.find(word) != std::string::npos);
  }
  CHECK(run("train --help", "train-help.txt") == 0);
  const std::string train_text = slurp(g_root / "train-help.txt");
  for (const char* flag : {"--config", "--data", "--out", "--seed", "--set"}) {
    CHECK(train_text.find(flag) != std::string::npos);
  }
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(run("") == 1);                          // missing subcommand
  CHECK(run("train --out x --frobnicate") == 1);  // unknown flag
  CHECK(run("bogus-command") == 1);
}

TEST_CASE("synth-data writes the documented directory layout") {
  const fs::path data = g_root / "data";
  CHECK(run("synth-data --classes 4 --samples 64 --height 16 --width 16 --seed 5 --out " +
            data.string()) == 0);
  int dirs = 0;
  for (const auto& cls : fs::directory_iterator(data)) {
    if (!cls.is_directory()) continue;
    ++dirs;
    int files = 0;
    for (const auto& f : fs::directory_iterator(cls.path())) {
      CHECK(f.path().extension() == ".aer");
      ++files;
    }
    CHECK(files == 16);
  }
  CHECK(dirs == 4);
}

TEST_CASE("config errors and data errors use distinct exit codes") {
  const fs::path cfg = g_root / "bad.cfg";
  std::ofstream(cfg) << "unknown_key = 1\n";
  CHECK(run("train --config " + cfg.string() + " --data " + (g_root / "data").string() +
            " --out " + (g_root / "o1").string()) == 1);
  write_desk_config(g_root / "desk.cfg");
  CHECK(run("train --config " + (g_root / "desk.cfg").string() + " --data " +
            (g_root / "no-such-dir").string() + " --out " + (g_root / "o2").string()) == 2);
}

TEST_CASE("train, eval and dump-features round trip through a checkpoint") {
  const std::string data = (g_root / "data").string();
  const std::string cfg = (g_root / "desk.cfg").string();
  write_desk_config(g_root / "desk.cfg");
  const fs::path run_dir = g_root / "run";
  CHECK(run("train --config " + cfg + " --data " + data + " --out " + run_dir.string() +
            " --seed 7", "train.txt") == 0);
  CHECK(fs::exists(run_dir / "metrics.csv"));
  CHECK(fs::exists(run_dir / "checkpoint-final.manifest"));
  const std::string metrics = slurp(run_dir / "metrics.csv");
  CHECK(metrics.rfind("epoch,loss,train_acc,val_acc\n", 0) == 0);

  const fs::path eval_dir = g_root / "eval";
  CHECK(run("eval --config " + cfg + " --data " + data + " --out " + eval_dir.string() +
            " --ckpt " + (run_dir / "checkpoint-final").string(), "eval.txt") == 0);
  CHECK(fs::exists(eval_dir / "confusion.csv"));

  const fs::path feat_dir = g_root / "features";
  CHECK(run("dump-features --config " + cfg + " --data " + data + " --out " + feat_dir.string() +
            " --ckpt " + (run_dir / "checkpoint-final").string() + " --sample 1") == 0);
  // T=10 keeps the default steps below the horizon: 0 and 5
  CHECK(fs::exists(feat_dir / "step0_ch0.pgm"));
  CHECK(fs::exists(feat_dir / "step5_ch7.pgm"));
  CHECK(fs::exists(feat_dir / "sparsity.csv"));

  // --set overrides reach the model: a different class head is rejected
  CHECK(run("train --config " + cfg + " --data " + data + " --out " + (g_root / "o3").string() +
            " --set fc_layers=8,3") == 1);
}

TEST_CASE("ablate emits the consolidated table") {
  const std::string data = (g_root / "data").string();
  write_desk_config(g_root / "ablate.cfg", "ablate_epochs = 1\ntime_steps = 20\n");
  const fs::path out = g_root / "ablate";
  CHECK(run("ablate --config " + (g_root / "ablate.cfg").string() + " --data " + data +
            " --out " + out.string(), "ablate.txt") == 0);
  const std::string csv = slurp(out / "ablation.csv");
  int lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 14);  // header + 13 configurations
  CHECK(csv.find("spiking-cbam-f,") != std::string::npos);
  CHECK(csv.find("timesteps-25,") != std::string::npos);
}

int main(int argc, char** argv) {
  doctest::Context context;
  if (argc > 1 && argv[1][0] != '-') {
    g_cli = argv[1];
    context.applyCommandLine(argc - 1, argv + 1);
  } else {
    context.applyCommandLine(argc, argv);
  }
  if (g_cli.empty()) {
    std::fprintf(stderr, "usage: test_cli <path-to-snnkit-binary>\n");
    return 2;
  }
  g_root = fs::temp_directory_path() / "snnkit-cli-test";
  fs::remove_all(g_root);
  fs::create_directories(g_root);
  const int rc = context.run();
  fs::remove_all(g_root);
  return rc;
}
