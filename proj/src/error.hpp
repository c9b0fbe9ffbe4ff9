#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace azoo {

enum class ErrorKind {
  InvalidArgument,
  Shape,
  Config,
  OutOfRange,
  Io,
  BadMagic,
  UnsupportedVersion,
  ChecksumMismatch,
  Truncated,
  Malformed,
  SpecInconsistent,
  MissingStream,
  LengthMismatch,
  Degenerate,
  InsufficientData,
};

const char* to_string(ErrorKind kind) noexcept;

// All library failures are reported through this exception; the kind is what
// the C API maps onto status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Case-insensitive comparison that ignores '_' and '-' ("actor_critic" == "ActorCritic").
bool loose_equal(std::string_view a, std::string_view b) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace azoo
