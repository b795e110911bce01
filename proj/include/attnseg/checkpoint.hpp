#pragma once

#include <map>
#include <string>

#include "attnseg/nn.hpp"

namespace attnseg {

// Single-file archive of named float64 tensors with a JSON header, plus a
// sidecar .json manifest (config hash, seed, epoch) for auditing without
// parsing the binary.
struct CheckpointMeta {
  uint64_t config_hash = 0;
  uint64_t seed = 0;
  int epoch = 0;
};

void save_checkpoint(const std::string& path, const nn::ParamList& params,
                     const CheckpointMeta& meta);

std::map<std::string, Tensor> load_checkpoint(const std::string& path,
                                              CheckpointMeta* meta = nullptr);

// Copies stored tensors into matching params; throws on missing name or shape
// mismatch.
void restore_params(const std::map<std::string, Tensor>& stored,
                    nn::ParamList& params);

}  // namespace attnseg
