#pragma once

#include <stdexcept>
#include <string>

namespace rfqa {

enum class ErrorCode {
  parse,
  empty_model,
  empty_pool,
  validation,
  length_mismatch,
  insufficient_overlap,
  not_applicable,
  layout_mismatch,
  io,
};

/// Exception carrying a machine-checkable category alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rfqa
