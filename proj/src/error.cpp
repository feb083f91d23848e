#include "semistatic/error.hpp"

#include <cstring>

namespace semistatic {

BranchError BranchError::displacement_out_of_range() {
  return {ErrorCode::DisplacementOutOfRange, std::string(kDisplacementOutOfRangeMessage)};
}

BranchError BranchError::duplicate_entry_point() {
  return {ErrorCode::DuplicateEntryPoint, std::string(kDuplicateEntryPointMessage)};
}

BranchError BranchError::unsupported_platform(std::string_view detail) {
  std::string msg = "semi-static conditions are unsupported on this platform";
  if (!detail.empty()) {
    msg += ": ";
    msg += detail;
  }
  return {ErrorCode::UnsupportedPlatform, std::move(msg)};
}

BranchError BranchError::platform_error(std::string_view call, int os_error) {
  std::string msg(call);
  msg += " failed: ";
  msg += std::strerror(os_error);
  return {ErrorCode::PlatformError, std::move(msg), os_error};
}

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DisplacementOutOfRange: return "DisplacementOutOfRange";
    case ErrorCode::DuplicateEntryPoint: return "DuplicateEntryPoint";
    case ErrorCode::UnsupportedPlatform: return "UnsupportedPlatform";
    case ErrorCode::PlatformError: return "PlatformError";
  }
  return "Unknown";
}

}  // namespace semistatic
