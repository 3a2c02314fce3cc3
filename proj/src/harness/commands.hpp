// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "harness/experiment.hpp"

namespace mvsync {

// Invocation options shared by every command; unset strings stay empty.
struct RunOptions {
  std::string config_path;             // JSON config; empty = pure defaults
  std::vector<std::string> overrides;  // "dotted.key=value" assignments
  std::string out_dir;                 // overrides the config's out_dir
  bool has_seed = false;
  uint64_t seed = 0;                   // overrides the config's seed
  std::string init;      // finetune encoder start: random | ssl | <path>
  std::string resume;    // checkpoint to continue training from
  std::string checkpoint;  // model to load for evaluation commands
  bool allow_mismatch = false;  // accept checkpoint/config disagreements
};

// Execute one command end to end. Artifacts land under the resolved output
// directory; the returned report is also written there as <command>.json.
// Commands: generate, pretrain, finetune, evaluate, sync-curve, retrieve,
// ablate, shortcut-probe.
Json run_command(const std::string& command, const RunOptions& opt);

const std::vector<std::string>& command_names();

}  // namespace mvsync
