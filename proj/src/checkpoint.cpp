#include "snnkit/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace snnkit {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_f64_le(std::ofstream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64_le(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw DataError("checkpoint payload ended early");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

void save_checkpoint(const std::string& base_path, Model& model, const CheckpointMeta& meta) {
  auto params = model.parameters();
  std::ofstream manifest(base_path + ".manifest", std::ios::trunc);
  if (!manifest) throw DataError("cannot write " + base_path + ".manifest");
  manifest << "format = snnkit-checkpoint-v1\n";
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(config_hash(model.config)));
  manifest << "config_hash = " << hash_buf << '\n';
  manifest << "epoch = " << meta.epoch << '\n';
  manifest << "loss = " << fmt_double(meta.loss) << '\n';
  manifest << "train_acc = " << fmt_double(meta.train_acc) << '\n';
  manifest << "val_acc = " << fmt_double(meta.val_acc) << '\n';
  std::int64_t offset = 0;
  for (auto& [name, t] : params) {
    manifest << "tensor = " << name << ' ' << offset << ' ' << t.size() << ' ';
    const Shape& s = t.shape();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) manifest << 'x';
      manifest << s[i];
    }
    manifest << '\n';
    offset += t.size();
  }

  std::ofstream payload(base_path + ".bin", std::ios::binary | std::ios::trunc);
  if (!payload) throw DataError("cannot write " + base_path + ".bin");
  for (auto& [name, t] : params) {
    for (Eigen::Index i = 0; i < t.data().size(); ++i) write_f64_le(payload, t.data()[i]);
  }
}

CheckpointMeta load_checkpoint(const std::string& base_path, Model& model) {
  std::ifstream manifest(base_path + ".manifest");
  if (!manifest) throw DataError("cannot open " + base_path + ".manifest");

  CheckpointMeta meta;
  struct Entry {
    std::int64_t offset = 0;
    std::int64_t count = 0;
    std::string shape;
  };
  std::map<std::string, Entry> index;
  std::string line;
  std::string stored_hash;
  while (std::getline(manifest, line)) {
    std::istringstream row(line);
    std::string key, eq;
    if (!(row >> key >> eq) || eq != "=") {
      throw DataError("malformed checkpoint manifest line: " + line);
    }
    if (key == "format") {
      std::string v;
      row >> v;
      if (v != "snnkit-checkpoint-v1") throw DataError("unsupported checkpoint format " + v);
    } else if (key == "config_hash") {
      row >> stored_hash;
    } else if (key == "epoch") {
      row >> meta.epoch;
    } else if (key == "loss") {
      row >> meta.loss;
    } else if (key == "train_acc") {
      row >> meta.train_acc;
    } else if (key == "val_acc") {
      row >> meta.val_acc;
    } else if (key == "tensor") {
      Entry e;
      std::string name;
      if (!(row >> name >> e.offset >> e.count >> e.shape)) {
        throw DataError("malformed tensor entry: " + line);
      }
      index[name] = e;
    } else {
      throw DataError("unknown checkpoint manifest key " + key);
    }
  }

  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(config_hash(model.config)));
  if (stored_hash != hash_buf) {
    throw DataError("checkpoint config hash " + stored_hash + " does not match model config " +
                    hash_buf);
  }

  std::ifstream payload(base_path + ".bin", std::ios::binary);
  if (!payload) throw DataError("cannot open " + base_path + ".bin");
  for (auto& [name, t] : model.parameters()) {
    auto it = index.find(name);
    if (it == index.end()) throw DataError("checkpoint lacks tensor " + name);
    if (it->second.count != t.size()) {
      throw DataError("checkpoint tensor " + name + " holds " + std::to_string(it->second.count) +
                      " values, model expects " + std::to_string(t.size()));
    }
    std::string want;
    for (std::size_t i = 0; i < t.shape().size(); ++i) {
      if (i) want += 'x';
      want += std::to_string(t.shape()[i]);
    }
    if (it->second.shape != want) {
      throw DataError("checkpoint tensor " + name + " has shape " + it->second.shape +
                      ", model expects " + want);
    }
    payload.seekg(it->second.offset * 8);
    for (Eigen::Index i = 0; i < t.raw().size(); ++i) t.raw()[i] = read_f64_le(payload);
  }
  return meta;
}

}  // namespace snnkit
