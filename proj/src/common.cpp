#include <cctype>

#include "pidsim/error.hpp"
#include "pidsim/types.hpp"

namespace pidsim {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::invalid_mac: return "invalid-mac";
    case Errc::duplicate_device: return "duplicate-device";
    case Errc::device_unknown: return "device-unknown";
    case Errc::initiator_unknown: return "initiator-unknown";
    case Errc::initiator_powered_off: return "initiator-powered-off";
    case Errc::powered_off: return "powered-off";
    case Errc::out_of_range: return "out-of-range";
    case Errc::piconet_full: return "piconet-full";
    case Errc::not_linked: return "not-linked";
    case Errc::malformed_url: return "malformed-url";
    case Errc::oversize_frame: return "oversize-frame";
    case Errc::truncated_frame: return "truncated-frame";
    case Errc::unknown_opcode: return "unknown-opcode";
    case Errc::unknown_header_id: return "unknown-header-id";
    case Errc::length_mismatch: return "length-mismatch";
    case Errc::invalid_name: return "invalid-name";
    case Errc::invalid_state: return "invalid-state";
    case Errc::non_integral: return "non-integral";
    case Errc::parse_error: return "parse-error";
    case Errc::validation_error: return "validation-error";
    case Errc::file_not_found: return "file-not-found";
    case Errc::no_ftp_devices: return "no-ftp-devices";
    case Errc::io_error: return "io-error";
  }
  return "unknown";
}

namespace {

std::string canonicalize(std::string_view text) {
  std::string out;
  out.reserve(12);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == ':' || c == '-') {
      // Separators only between digit pairs.
      if (out.empty() || out.size() % 2 != 0 || i + 1 == text.size()) return {};
      continue;
    }
    if (!std::isxdigit(static_cast<unsigned char>(c))) return {};
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (out.size() != 12) return {};
  return out;
}

}  // namespace

bool MacId::is_valid(std::string_view text) noexcept {
  try {
    return !canonicalize(text).empty();
  } catch (...) {
    return false;
  }
}

MacId MacId::parse(std::string_view text) {
  auto canonical = canonicalize(text);
  if (canonical.empty()) {
    throw Error(Errc::invalid_mac, "invalid MAC id '" + std::string(text) + "': expected 12 hex digits");
  }
  return MacId(std::move(canonical));
}

}  // namespace pidsim
