// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nn/tensor.hpp"

namespace mvsync {

enum class CheckpointKind : uint32_t { ssl = 0, pose = 1 };

// Versioned binary container for model, optimizer, and sampler state.
struct Checkpoint {
  CheckpointKind kind = CheckpointKind::ssl;
  uint64_t step = 0;
  uint64_t config_hash = 0;
  uint64_t dataset_hash = 0;
  std::string rng_state;
  std::vector<std::pair<std::string, std::vector<float>>> tensors;

  const std::vector<float>* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.first == name) return &t.second;
    return nullptr;
  }
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Copy every entry of the dict into the checkpoint (by value).
void pack_state(Checkpoint& ckpt, const StateDict<float>& dict);

// Restore entries by name; every dict entry must be present with a matching
// size.
void unpack_state(const Checkpoint& ckpt, const StateDict<float>& dict);

}  // namespace mvsync
