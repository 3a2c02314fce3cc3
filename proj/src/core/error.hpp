// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mvsync {

// Error categories mirror the status codes of the C API.
enum class ErrorCode {
  argument = 1,
  structure = 2,
  io = 3,
  decode = 4,
  geometry = 5,
  sampling = 6,
  config = 7,
  eval = 8,
  numeric = 9,
  alignment = 10,
  internal = 11,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

#define MVSYNC_DEFINE_ERROR(Name, code_value)                    \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& msg)                        \
        : Error(ErrorCode::code_value, msg) {}                   \
  }

MVSYNC_DEFINE_ERROR(ArgumentError, argument);
MVSYNC_DEFINE_ERROR(StructureError, structure);
MVSYNC_DEFINE_ERROR(IoError, io);
MVSYNC_DEFINE_ERROR(DecodeError, decode);
MVSYNC_DEFINE_ERROR(GeometryError, geometry);
MVSYNC_DEFINE_ERROR(SamplingError, sampling);
MVSYNC_DEFINE_ERROR(ConfigError, config);
MVSYNC_DEFINE_ERROR(EvalError, eval);
MVSYNC_DEFINE_ERROR(NumericError, numeric);
MVSYNC_DEFINE_ERROR(AlignmentError, alignment);
MVSYNC_DEFINE_ERROR(InternalError, internal);

#undef MVSYNC_DEFINE_ERROR

}  // namespace mvsync
