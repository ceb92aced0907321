#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace outage {

enum class Errc {
  malformed,
  already_aggregated,
  zero_length_window,
  unsorted,
  not_measurable,
  insufficient_signal,
  inconsistent_truth,
  bad_tolerance,
  bad_spec,
  no_blocks,
  invalid_argument,
  io,
};

const char* to_string(Errc code);

// All library failures are reported through this type so callers can branch on
// code() instead of parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// A record-level failure in a line-oriented input. line() is 1-based.
class LineError : public Error {
 public:
  LineError(Errc code, std::size_t line, const std::string& what)
      : Error(code, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace outage
