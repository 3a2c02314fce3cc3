// SPDX-License-Identifier: Apache-2.0
#include "ssl/model.hpp"

#include "core/error.hpp"

namespace mvsync {

FusionMode parse_fusion(const std::string& s) {
  if (s == "mult") return FusionMode::mult;
  if (s == "concat") return FusionMode::concat;
  if (s == "add") return FusionMode::add;
  if (s == "diff") return FusionMode::diff;
  throw ConfigError("unknown fusion mode '" + s + "'");
}

SignalMask parse_signal(const std::string& s) {
  if (s == "both") return SignalMask::both;
  if (s == "sync_only") return SignalMask::sync_only;
  if (s == "flip_only") return SignalMask::flip_only;
  throw ConfigError("unknown signal mask '" + s + "'");
}

const char* fusion_name(FusionMode m) {
  switch (m) {
    case FusionMode::mult: return "mult";
    case FusionMode::concat: return "concat";
    case FusionMode::add: return "add";
    case FusionMode::diff: return "diff";
  }
  return "mult";
}

const char* signal_name(SignalMask m) {
  switch (m) {
    case SignalMask::both: return "both";
    case SignalMask::sync_only: return "sync_only";
    case SignalMask::flip_only: return "flip_only";
  }
  return "both";
}

}  // namespace mvsync
