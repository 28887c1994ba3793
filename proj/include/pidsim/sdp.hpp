#pragma once

#include <map>
#include <set>
#include <string_view>
#include <vector>

#include "pidsim/service_record.hpp"
#include "pidsim/simnet.hpp"

namespace pidsim::sdp {

struct ServiceCatalog {
  // Devices that answered with at least one record, records in service_id order.
  std::map<MacId, std::vector<ServiceRecord>> services;
  // Devices queried that returned nothing (includes departed ones).
  std::set<MacId> zero_service;
  // Subset of zero_service: targets gone before their query finished.
  std::set<MacId> departed;

  bool empty() const noexcept { return services.empty() && zero_service.empty(); }
};

/// Queries each target in MAC order, spending `service_search_per_device` of
/// simulated time on each. Targets must have been discovered by `initiator`.
ServiceCatalog search_services(simnet::SimWorld& world, const MacId& initiator, const std::set<MacId>& targets,
                               const simnet::RadioParams& params);

// Case-insensitive "file transfer" substring match on the service name.
bool is_ftp_service(std::string_view service_name);

/// Lowest-id FTP-profile record per device; devices without one are absent.
std::map<MacId, ServiceRecord> filter_ftp(const ServiceCatalog& catalog);

MacId parse_mac_from_url(std::string_view url_text);

}  // namespace pidsim::sdp
