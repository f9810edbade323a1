#pragma once

#include <stdexcept>
#include <string>

namespace vh {

enum class Errc {
  out_of_range,
  device_failed,
  not_erased,
  log_full,
  invalid_item,
  corrupt_log,
  ack_regression,
  malformed,
  non_canonical,
  overflow,
  validation,
  io,
};

/// Exit code category used by the command-line tool: 1 validation, 2 I/O,
/// 3 format/corruption.
int exit_code_for(Errc code);

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace vh
