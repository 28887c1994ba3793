#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "pidsim/types.hpp"

namespace pidsim::sdp {

/// Addressable endpoint of a service: `<scheme>://<MAC>:<channel>/<path>`.
/// The scheme is opaque and never validated beyond being a plain token.
struct ConnectionUrl {
  std::string scheme;
  MacId mac;
  std::uint32_t channel = 1;
  std::string path;

  std::string render() const;
  static ConnectionUrl parse(std::string_view text);

  bool operator==(const ConnectionUrl&) const = default;
};

struct ServiceRecord {
  std::uint32_t service_id = 1;
  std::string service_name;
  ConnectionUrl connection_url;

  bool operator==(const ServiceRecord&) const = default;
};

}  // namespace pidsim::sdp
