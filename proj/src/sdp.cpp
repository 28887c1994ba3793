#include "pidsim/sdp.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace pidsim::sdp {

std::string ConnectionUrl::render() const {
  return scheme + "://" + mac.str() + ":" + std::to_string(channel) + "/" + path;
}

ConnectionUrl ConnectionUrl::parse(std::string_view text) {
  auto fail = [&](const char* why) {
    return Error(Errc::malformed_url, "malformed connection URL '" + std::string(text) + "': " + why);
  };
  const auto sep = text.find("://");
  if (sep == std::string_view::npos || sep == 0) throw fail("missing scheme separator");
  ConnectionUrl url;
  url.scheme = std::string(text.substr(0, sep));
  if (url.scheme.find_first_of(":/") != std::string::npos) throw fail("bad scheme");

  const auto rest = text.substr(sep + 3);
  const auto colon = rest.find(':');
  if (colon == std::string_view::npos) throw fail("missing channel");
  const auto authority = rest.substr(0, colon);
  if (authority.size() != 12 || !std::all_of(authority.begin(), authority.end(), [](char c) {
        return std::isxdigit(static_cast<unsigned char>(c)) != 0;
      })) {
    throw fail("authority is not 12 hex digits");
  }
  url.mac = MacId::parse(authority);

  const auto after = rest.substr(colon + 1);
  const auto slash = after.find('/');
  if (slash == std::string_view::npos) throw fail("missing path separator");
  const auto channel = after.substr(0, slash);
  const auto [ptr, ec] = std::from_chars(channel.data(), channel.data() + channel.size(), url.channel);
  if (channel.empty() || ec != std::errc{} || ptr != channel.data() + channel.size() || url.channel == 0 ||
      channel.front() == '0') {
    throw fail("channel must be a positive integer");
  }
  url.path = std::string(after.substr(slash + 1));
  return url;
}

ServiceCatalog search_services(simnet::SimWorld& world, const MacId& initiator, const std::set<MacId>& targets,
                               const simnet::RadioParams& params) {
  params.validate();
  const auto& seen = world.discovered_by(initiator);
  for (const auto& mac : targets) {
    if (!seen.contains(mac)) {
      throw Error(Errc::invalid_argument, "service search target " + mac.str() + " was never discovered");
    }
  }

  ServiceCatalog catalog;
  for (const auto& mac : targets) {
    world.emit("service_search_started", {{"initiator", initiator.str()}, {"mac", mac.str()}});
    world.advance(world.now() + params.service_search_per_device);

    const auto& local = world.device(initiator);
    const auto& dev = world.device(mac);
    const bool reachable = dev.powered && dev.present_at(world.now()) && simnet::in_range(local, dev, params);
    if (!reachable) {
      catalog.zero_service.insert(mac);
      catalog.departed.insert(mac);
      world.emit("service_search_completed", {{"mac", mac.str()}, {"response", "departed"}, {"services", "0"}});
      continue;
    }

    auto records = dev.services;
    std::sort(records.begin(), records.end(),
              [](const ServiceRecord& a, const ServiceRecord& b) { return a.service_id < b.service_id; });
    for (const auto& rec : records) {
      if (rec.connection_url.mac != mac) throw std::logic_error("service record URL does not name its device");
    }
    if (records.empty()) {
      catalog.zero_service.insert(mac);
      world.emit("service_search_completed", {{"mac", mac.str()}, {"response", "no-records"}, {"services", "0"}});
      continue;
    }
    world.emit("services_discovered", {{"count", std::to_string(records.size())},
                                       {"mac", mac.str()},
                                       {"name", dev.friendly_name}});
    world.emit("service_search_completed",
               {{"mac", mac.str()}, {"response", "completed"}, {"services", std::to_string(records.size())}});
    catalog.services.emplace(mac, std::move(records));
  }
  return catalog;
}

bool is_ftp_service(std::string_view service_name) {
  constexpr std::string_view kNeedle = "file transfer";
  auto it = std::search(service_name.begin(), service_name.end(), kNeedle.begin(), kNeedle.end(),
                        [](char a, char b) {
                          return std::tolower(static_cast<unsigned char>(a)) == static_cast<unsigned char>(b);
                        });
  return it != service_name.end();
}

std::map<MacId, ServiceRecord> filter_ftp(const ServiceCatalog& catalog) {
  std::map<MacId, ServiceRecord> out;
  for (const auto& [mac, records] : catalog.services) {
    const ServiceRecord* best = nullptr;
    for (const auto& rec : records) {
      if (is_ftp_service(rec.service_name) && (best == nullptr || rec.service_id < best->service_id)) best = &rec;
    }
    if (best != nullptr) out.emplace(mac, *best);
  }
  return out;
}

MacId parse_mac_from_url(std::string_view url_text) { return ConnectionUrl::parse(url_text).mac; }

}  // namespace pidsim::sdp
