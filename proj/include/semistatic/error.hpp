#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semistatic {

enum class ErrorCode {
  DisplacementOutOfRange,
  DuplicateEntryPoint,
  UnsupportedPlatform,
  PlatformError,
};

inline constexpr std::string_view kDisplacementOutOfRangeMessage =
    "Supplied branch targets (as function pointers) exceed a 2GiB displacement from the "
    "entry point in the text segment, and cannot be reached with a 32-bit relative jump. "
    "Consider moving the entry point to different areas in the text segment by altering "
    "hot/cold attributes.";

inline constexpr std::string_view kDuplicateEntryPointMessage =
    "More than once instance for template specialised semi-static conditions detected. "
    "Program terminated as multiple instances sharing the same entry point is dangerous "
    "and results in undefined behaviour (multiple instances write to same function.";

/// Thrown by every operation that edits or protects code.
///
/// `what()` is byte-exact for DisplacementOutOfRange and DuplicateEntryPoint so
/// callers can match on the message. PlatformError carries the errno of the
/// failing system call in `os_error()`.
class BranchError : public std::runtime_error {
 public:
  BranchError(ErrorCode code, std::string message, int os_error = 0)
      : std::runtime_error(std::move(message)), code_(code), os_error_(os_error) {}

  static BranchError displacement_out_of_range();
  static BranchError duplicate_entry_point();
  static BranchError unsupported_platform(std::string_view detail);
  static BranchError platform_error(std::string_view call, int os_error);

  ErrorCode code() const noexcept { return code_; }
  int os_error() const noexcept { return os_error_; }

 private:
  ErrorCode code_;
  int os_error_;
};

std::string_view to_string(ErrorCode code) noexcept;

}  // namespace semistatic
