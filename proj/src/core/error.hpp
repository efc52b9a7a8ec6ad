#pragma once

#include <stdexcept>
#include <string>

namespace omgm {

// Mirrors omgm_status in the C header; values must stay in sync.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kIo = 2,
  kParse = 3,
  kDuplicateId = 4,
  kNotFound = 5,
  kDimsMismatch = 6,
  kTransport = 7,
  kProtocol = 8,
  kCorrupt = 9,
  kVersion = 10,
  kConsistency = 11,
  kResolution = 12,
  kInternal = 13,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Prefixes the message with a context string while keeping the code.
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context);

}  // namespace omgm
