#include "pidsim/simnet.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace pidsim::simnet {

namespace {

bool needs_quoting(const std::string& v) {
  if (v.empty()) return true;
  for (char c : v) {
    if (c == ' ' || c == '"' || c == '=' || c == '\\' || c == '\n' || c == '\t') return true;
  }
  return false;
}

void append_value(std::string& out, const std::string& v) {
  if (!needs_quoting(v)) {
    out += v;
    return;
  }
  out.push_back('"');
  for (char c : v) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
}

}  // namespace

void RadioParams::validate() const {
  if (!(range_m > 0.0) || inquiry_duration.count() <= 0 || service_search_per_device.count() <= 0 ||
      link_rate_bps <= 0 || session_overhead.count() <= 0) {
    throw Error(Errc::invalid_argument, "radio parameters must be strictly positive");
  }
  if (!(loss_probability >= 0.0 && loss_probability <= 1.0)) {
    throw Error(Errc::invalid_argument, "loss_probability must lie in [0, 1]");
  }
}

std::string LogEntry::render() const {
  std::string out = "t=" + std::to_string(time.millis) + " seq=" + std::to_string(seq) + " ev=" + event;
  for (const auto& [key, value] : fields) {
    out.push_back(' ');
    out += key;
    out.push_back('=');
    append_value(out, value);
  }
  return out;
}

std::string format_field_value(const std::string& value) {
  std::string out;
  append_value(out, value);
  return out;
}

std::string render_log(const std::vector<LogEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += e.render();
    out.push_back('\n');
  }
  return out;
}

SimWorld::SimWorld(std::uint64_t seed, RadioParams params) : seed_(seed), params_(params), rng_(seed) {
  params_.validate();
}

void SimWorld::add_device(RadioDevice device) {
  if (device.mac.empty()) throw Error(Errc::invalid_mac, "device without MAC id");
  if (devices_.contains(device.mac)) {
    throw Error(Errc::duplicate_device, "duplicate device " + device.mac.str());
  }
  if (device.departure && !(device.arrival < *device.departure)) {
    throw Error(Errc::invalid_argument, "device " + device.mac.str() + ": arrival must precede departure");
  }
  for (const auto& rec : device.services) {
    if (rec.connection_url.mac != device.mac) {
      throw Error(Errc::invalid_argument, "service URL of " + device.mac.str() + " names another device");
    }
  }
  const MacId mac = device.mac;
  if (device.arrival > now_) schedule(device.arrival, DeviceArrives{mac});
  if (device.departure && *device.departure > now_) schedule(*device.departure, DeviceDeparts{mac});
  devices_.emplace(mac, std::move(device));
}

const RadioDevice& SimWorld::device(const MacId& mac) const {
  auto it = devices_.find(mac);
  if (it == devices_.end()) throw Error(Errc::device_unknown, "unknown device " + mac.str());
  return it->second;
}

RadioDevice& SimWorld::device(const MacId& mac) {
  auto it = devices_.find(mac);
  if (it == devices_.end()) throw Error(Errc::device_unknown, "unknown device " + mac.str());
  return it->second;
}

const RadioDevice* SimWorld::find_device(const MacId& mac) const noexcept {
  auto it = devices_.find(mac);
  return it == devices_.end() ? nullptr : &it->second;
}

void SimWorld::set_powered(const MacId& mac, bool powered) { device(mac).powered = powered; }

void SimWorld::schedule_marker(SimTime at, Marker marker) {
  if (at < now_) throw Error(Errc::invalid_argument, "cannot schedule in the past");
  schedule(at, std::move(marker));
}

void SimWorld::schedule(SimTime at, Payload payload) { queue_.push(Scheduled{at, next_event_seq_++, std::move(payload)}); }

std::vector<LogEntry> SimWorld::advance(SimTime until) {
  if (until < now_) throw Error(Errc::invalid_argument, "advance target lies before the current time");
  const std::size_t first = log_.size();
  while (!queue_.empty() && queue_.top().at <= until) {
    Scheduled next = queue_.top();
    queue_.pop();
    now_ = next.at;
    dispatch(next.payload);
    check_piconet_cap();
  }
  now_ = until;
  return {log_.begin() + static_cast<std::ptrdiff_t>(first), log_.end()};
}

const LogEntry& SimWorld::emit(std::string event, std::map<std::string, std::string> fields) {
  log_.push_back(LogEntry{now_, log_.size() + 1, std::move(event), std::move(fields)});
  return log_.back();
}

double SimWorld::draw_unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

void SimWorld::dispatch(const Payload& payload) {
  if (const auto* m = std::get_if<Marker>(&payload)) {
    emit(m->name, m->fields);
  } else if (const auto* probe = std::get_if<DiscoveryProbe>(&payload)) {
    auto& inquiry = inquiries_.at(probe->inquiry);
    const auto* initiator = find_device(inquiry.initiator);
    const auto* target = find_device(probe->target);
    if (initiator == nullptr || target == nullptr) return;
    if (!initiator->powered || !target->discoverable_at(now_) || !in_range(*initiator, *target, inquiry.params)) {
      return;
    }
    inquiry.result.discovered.emplace_back(target->mac, now_);
    discovered_[inquiry.initiator].insert(target->mac);
    emit("device_discovered", {{"inquiry", std::to_string(probe->inquiry)},
                               {"mac", target->mac.str()},
                               {"name", target->friendly_name}});
  } else if (const auto* done = std::get_if<InquiryDone>(&payload)) {
    auto& inquiry = inquiries_.at(done->inquiry);
    inquiry.result.completed = true;
    std::string macs;
    for (const auto& [mac, at] : inquiry.result.discovered) {
      if (!macs.empty()) macs.push_back(',');
      macs += mac.str();
    }
    emit("inquiry_completed", {{"count", std::to_string(inquiry.result.discovered.size())},
                               {"devices", macs.empty() ? "-" : macs},
                               {"initiator", inquiry.initiator.str()},
                               {"inquiry", std::to_string(done->inquiry)}});
  } else if (const auto* arrives = std::get_if<DeviceArrives>(&payload)) {
    emit("device_arrived", {{"mac", arrives->mac.str()}});
  } else if (const auto* departs = std::get_if<DeviceDeparts>(&payload)) {
    emit("device_departed", {{"mac", departs->mac.str()}});
    std::vector<LinkHandle> affected;
    for (const auto& [id, link] : links_) {
      if (link.slave == departs->mac || link.master == departs->mac) affected.push_back(link);
    }
    for (const auto& link : affected) close_link(link, "departed");
  }
}

void SimWorld::check_piconet_cap() const {
  for (const auto& [master, net] : piconets_) {
    if (net.slaves.size() > kMaxActiveSlaves || net.slaves.contains(master)) {
      throw std::logic_error("piconet invariant violated for master " + master.str());
    }
  }
}

InquiryHandle SimWorld::begin_inquiry(const MacId& initiator, const RadioParams& params) {
  const auto* local = find_device(initiator);
  if (local == nullptr) throw Error(Errc::initiator_unknown, "inquiry initiator " + initiator.str() + " is unknown");
  if (!local->powered) {
    throw Error(Errc::initiator_powered_off, "inquiry initiator " + initiator.str() + " is powered off");
  }
  params.validate();

  InquiryHandle handle;
  handle.id = next_inquiry_++;
  handle.initiator = initiator;
  handle.started = now_;
  handle.completes = now_ + params.inquiry_duration;
  inquiries_.emplace(handle.id, InquiryState{initiator, params, {}});

  emit("inquiry_started", {{"initiator", initiator.str()},
                           {"inquiry", std::to_string(handle.id)},
                           {"window_ms", std::to_string(params.inquiry_duration.count())}});

  // devices_ iterates in MAC order, which fixes the RNG draw order.
  const auto window = static_cast<std::uint64_t>(params.inquiry_duration.count());
  for (const auto& [mac, dev] : devices_) {
    if (mac == initiator) continue;
    const SimTime at = now_ + Duration{static_cast<std::int64_t>(1 + rng_() % window)};
    handle.response_times.emplace(mac, at);
    schedule(at, DiscoveryProbe{handle.id, mac});
  }
  schedule(handle.completes, InquiryDone{handle.id});
  return handle;
}

const InquiryResult& SimWorld::inquiry_result(std::uint64_t id) const {
  auto it = inquiries_.find(id);
  if (it == inquiries_.end()) throw Error(Errc::invalid_argument, "unknown inquiry " + std::to_string(id));
  return it->second.result;
}

const std::set<MacId>& SimWorld::discovered_by(const MacId& initiator) const {
  static const std::set<MacId> kNone;
  auto it = discovered_.find(initiator);
  return it == discovered_.end() ? kNone : it->second;
}

LinkHandle SimWorld::open_link(const MacId& master, const MacId& slave) {
  if (master == slave) throw Error(Errc::invalid_argument, "a device cannot link to itself");
  const auto& m = device(master);
  const auto& s = device(slave);
  if (!m.present_at(now_) || !s.present_at(now_)) {
    throw Error(Errc::out_of_range, "link " + master.str() + "->" + slave.str() + ": device not present");
  }
  if (!m.powered || !s.powered) {
    throw Error(Errc::powered_off, "link " + master.str() + "->" + slave.str() + ": device powered off");
  }
  if (!in_range(m, s, params_)) {
    throw Error(Errc::out_of_range, "link " + master.str() + "->" + slave.str() + ": out of range");
  }
  auto& net = piconets_[master];
  net.master = master;
  if (net.slaves.contains(slave)) {
    throw Error(Errc::invalid_argument, "link " + master.str() + "->" + slave.str() + " already open");
  }
  if (net.slaves.size() >= kMaxActiveSlaves) {
    throw Error(Errc::piconet_full, "piconet of " + master.str() + " already has 7 active slaves");
  }
  net.slaves.insert(slave);
  peak_slaves_ = std::max(peak_slaves_, net.slaves.size());

  LinkHandle link{master, slave, next_link_++};
  links_.emplace(link.id, link);
  emit("link_opened", {{"link", std::to_string(link.id)},
                       {"master", master.str()},
                       {"slave", slave.str()},
                       {"slaves", std::to_string(net.slaves.size())}});
  return link;
}

void SimWorld::close_link(const LinkHandle& link, std::string_view reason) {
  if (links_.erase(link.id) == 0) return;
  auto& net = piconets_[link.master];
  net.slaves.erase(link.slave);
  emit("link_closed", {{"link", std::to_string(link.id)},
                       {"master", link.master.str()},
                       {"reason", std::string(reason)},
                       {"slave", link.slave.str()},
                       {"slaves", std::to_string(net.slaves.size())}});
}

bool SimWorld::link_open(const LinkHandle& link) const noexcept { return links_.contains(link.id); }

bool in_range(const RadioDevice& a, const RadioDevice& b, const RadioParams& params) {
  const double dx = a.position.x - b.position.x;
  const double dy = a.position.y - b.position.y;
  return std::hypot(dx, dy) <= params.range_m;
}

InquiryHandle start_inquiry(SimWorld& world, const MacId& initiator, const RadioParams& params) {
  return world.begin_inquiry(initiator, params);
}

const InquiryResult& complete_inquiry(SimWorld& world, const InquiryHandle& handle) {
  if (world.now() < handle.completes) world.advance(handle.completes);
  return world.inquiry_result(handle.id);
}

LinkHandle connect(SimWorld& world, const MacId& master, const MacId& slave) { return world.open_link(master, slave); }

void disconnect(SimWorld& world, const LinkHandle& link) {
  if (!world.link_open(link)) throw Error(Errc::not_linked, "link " + std::to_string(link.id) + " is not open");
  world.close_link(link, "disconnect");
}

Duration transfer_duration(std::uint64_t bytes, const RadioParams& params) {
  constexpr std::uint64_t kMaxBytes = std::numeric_limits<std::uint64_t>::max() / 8000u;
  if (bytes > kMaxBytes) throw Error(Errc::invalid_argument, "transfer size overflows the duration model");
  const auto rate = static_cast<std::uint64_t>(params.link_rate_bps);
  const std::uint64_t bit_millis = bytes * 8000u;
  const std::uint64_t airtime = bit_millis / rate + (bit_millis % rate != 0 ? 1 : 0);
  return params.session_overhead + Duration{static_cast<std::int64_t>(airtime)};
}

}  // namespace pidsim::simnet
