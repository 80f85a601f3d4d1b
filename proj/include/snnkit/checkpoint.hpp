#pragma once

#include <string>

#include "snnkit/model.hpp"

namespace snnkit {

struct CheckpointMeta {
  std::int64_t epoch = 0;
  double loss = 0;
  double train_acc = 0;
  double val_acc = 0;
};

// Writes <base>.manifest (human-readable key/value plus a tensor
// name -> offset/shape index) and <base>.bin (flat little-endian float64
// payload). Reloading reproduces bitwise-identical parameters.
void save_checkpoint(const std::string& base_path, Model& model, const CheckpointMeta& meta);

// Loads parameters into a model built from the same configuration; the
// stored config hash and every tensor shape must match.
CheckpointMeta load_checkpoint(const std::string& base_path, Model& model);

}  // namespace snnkit
