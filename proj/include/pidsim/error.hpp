#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pidsim {

enum class Errc {
  invalid_argument,
  invalid_mac,
  duplicate_device,
  device_unknown,
  initiator_unknown,
  initiator_powered_off,
  powered_off,
  out_of_range,
  piconet_full,
  not_linked,
  malformed_url,
  oversize_frame,
  truncated_frame,
  unknown_opcode,
  unknown_header_id,
  length_mismatch,
  invalid_name,
  invalid_state,
  non_integral,
  parse_error,
  validation_error,
  file_not_found,
  no_ftp_devices,
  io_error,
};

/// Kebab-case identifier, stable across releases; used in reports and logs.
std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace pidsim
