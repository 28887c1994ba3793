#include "pidsim/pidctl.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace pidsim::pidctl {

namespace {

std::string ms(SimTime t) { return std::to_string(t.millis); }
std::string ms_or_dash(const std::optional<SimTime>& t) { return t ? ms(*t) : "-"; }

}  // namespace

void Roster::validate() const {
  if (window_before.count() < 0 || window_after.count() < 0) {
    throw Error(Errc::validation_error, "roster windows must be non-negative");
  }
  if (late_cutoff && (*late_cutoff < window_start() || *late_cutoff > window_end())) {
    throw Error(Errc::validation_error, "late_cutoff must lie inside the delivery window");
  }
  if (max_retries < 1) throw Error(Errc::validation_error, "max_retries must be at least 1");
}

bool verify_member(const Roster& roster, const MacId& mac) { return roster.members.contains(mac); }

bool verify_member(const Roster& roster, std::string_view mac_text) {
  if (!MacId::is_valid(mac_text)) return false;
  return verify_member(roster, MacId::parse(mac_text));
}

std::string_view to_string(SkipReason r) noexcept {
  switch (r) {
    case SkipReason::no_ftp_service: return "no-ftp-service";
    case SkipReason::late: return "late";
    case SkipReason::refused: return "refused";
    case SkipReason::retries_exhausted: return "retries-exhausted";
  }
  return "unknown";
}

std::string_view to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::delivered: return "delivered";
    case Outcome::never_discovered: return "never-discovered";
    case Outcome::no_ftp_service: return "no-ftp-service";
    case Outcome::late: return "late";
    case Outcome::refused: return "refused";
    case Outcome::retries_exhausted: return "retries-exhausted";
    case Outcome::window_closed: return "window-closed";
  }
  return "unknown";
}

void SessionState::mark_delivered(const MacId& mac, SimTime at) {
  if (pending.erase(mac) == 0) throw std::logic_error("delivery to a member that is not pending: " + mac.str());
  delivered.emplace(mac, at);
}

void SessionState::mark_skipped(const MacId& mac, SkipReason reason) {
  if (pending.erase(mac) == 0) throw std::logic_error("skipping a member that is not pending: " + mac.str());
  skipped.emplace(mac, reason);
}

bool SessionState::consistent_with(const std::set<MacId>& members) const {
  std::set<MacId> seen;
  for (const auto& m : pending) seen.insert(m);
  for (const auto& [m, at] : delivered) {
    if (!seen.insert(m).second) return false;
  }
  for (const auto& [m, why] : skipped) {
    if (!seen.insert(m).second) return false;
  }
  return seen == members;
}

std::vector<PushTarget> choose_push_target(const std::map<MacId, sdp::ServiceRecord>& ftp, const Roster& roster,
                                           const SessionState& state) {
  std::vector<PushTarget> out;
  for (const auto& [mac, record] : ftp) {
    if (!verify_member(roster, mac) || !state.pending.contains(mac)) continue;
    auto seen = state.first_seen.find(mac);
    out.push_back(PushTarget{mac, record.connection_url, seen == state.first_seen.end() ? SimTime{0} : seen->second});
  }
  std::sort(out.begin(), out.end(), [](const PushTarget& a, const PushTarget& b) {
    return a.first_seen != b.first_seen ? a.first_seen < b.first_seen : a.mac < b.mac;
  });
  return out;
}

FileSpec load_file(const std::string& path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.empty() || !fs::is_regular_file(path, ec)) {
    throw Error(Errc::file_not_found, "file not found: '" + path + "'");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open '" + path + "'");
  FileSpec spec;
  spec.name = fs::path(path).filename().string();
  spec.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return spec;
}

const MemberOutcome* DeliveryReport::find(const MacId& mac) const {
  auto it = std::find_if(members.begin(), members.end(), [&](const MemberOutcome& m) { return m.mac == mac; });
  return it == members.end() ? nullptr : &*it;
}

std::set<MacId> DeliveryReport::delivered_set() const {
  std::set<MacId> out;
  for (const auto& m : members) {
    if (m.outcome == Outcome::delivered) out.insert(m.mac);
  }
  return out;
}

std::string DeliveryReport::render() const {
  std::string out;
  out += "report course=" + simnet::format_field_value(roster.course_id) +
         " members=" + std::to_string(roster.members.size()) + " window_start=" + ms(roster.window_start()) +
         " window_end=" + ms(roster.window_end()) + " late_cutoff=" + ms_or_dash(roster.late_cutoff) +
         " max_retries=" + std::to_string(roster.max_retries) + "\n";
  for (const auto& m : members) {
    out += "member mac=" + m.mac.str() + " outcome=" + std::string(to_string(m.outcome)) +
           " at=" + ms_or_dash(m.delivered_at) + " first_seen=" + ms_or_dash(m.first_seen) +
           " attempts=" + std::to_string(m.attempts) + "\n";
  }
  for (const auto& d : non_members) {
    out += "excluded mac=" + d.mac.str() + " outcome=non-member first_seen=" + ms(d.first_seen) +
           " name=" + simnet::format_field_value(d.name) + "\n";
  }
  for (const auto& it : iterations) {
    out += "iteration n=" + std::to_string(it.index) + " start=" + ms(it.started) +
           " discovered=" + std::to_string(it.discovered) + " searched=" + std::to_string(it.searched) +
           " transfers=" + std::to_string(it.transfers) + " delivered=" + std::to_string(it.delivered) +
           " failed=" + std::to_string(it.failed) + "\n";
  }
  auto count = [this](Outcome o) {
    auto it = totals.by_outcome.find(o);
    return std::to_string(it == totals.by_outcome.end() ? 0 : it->second);
  };
  out += "summary members=" + std::to_string(totals.members) + " delivered=" + std::to_string(totals.delivered) +
         " skipped=" + std::to_string(totals.skipped) + " pending=" + std::to_string(totals.pending_at_exit) +
         " never_discovered=" + count(Outcome::never_discovered) + " no_ftp_service=" +
         count(Outcome::no_ftp_service) + " late=" + count(Outcome::late) + " refused=" + count(Outcome::refused) +
         " retries_exhausted=" + count(Outcome::retries_exhausted) + " window_closed=" +
         count(Outcome::window_closed) + " non_members=" + std::to_string(totals.non_members) +
         " finished=" + ms(finished) + "\n";
  return out;
}

DeliveryReport run_proactive(simnet::SimWorld& world, const MacId& local, const Roster& roster, const FileSpec& file,
                             const simnet::RadioParams& params, Duration inquiry_interval) {
  roster.validate();
  params.validate();
  if (file.name.empty()) throw Error(Errc::invalid_name, "file name must be non-empty");
  if (inquiry_interval.count() <= 0) throw Error(Errc::invalid_argument, "inquiry interval must be positive");

  SessionState state(roster.members);
  DeliveryReport report;
  report.roster = roster;

  const SimTime start = roster.window_start();
  const SimTime end = roster.window_end();
  if (world.now() < start) world.advance(start);
  world.emit("proactive_started", {{"course", roster.course_id},
                                   {"members", std::to_string(roster.members.size())},
                                   {"window_end", ms(end)},
                                   {"window_start", ms(start)}});

  std::map<MacId, std::vector<sdp::ServiceRecord>> service_cache;
  std::map<MacId, ExcludedDevice> excluded;

  for (int k = 0; !state.pending.empty(); ++k) {
    // Next grid point at or after now; an overrunning iteration skips slots.
    const auto elapsed = (world.now() - start).count();
    const auto interval = inquiry_interval.count();
    k = std::max<int>(k, static_cast<int>((elapsed + interval - 1) / interval));
    const SimTime slot = start + Duration{static_cast<std::int64_t>(k) * interval};
    if (slot >= end) break;
    world.advance(slot);

    IterationStats stats;
    stats.index = static_cast<int>(report.iterations.size()) + 1;
    stats.started = slot;

    const auto& result = simnet::complete_inquiry(world, simnet::start_inquiry(world, local, params));
    stats.discovered = result.discovered.size();

    std::set<MacId> present;
    std::set<MacId> to_search;
    for (const auto& [mac, at] : result.discovered) {
      present.insert(mac);
      const bool first_time = state.first_seen.emplace(mac, at).second;
      if (!verify_member(roster, mac)) {
        if (first_time) {
          excluded.emplace(mac, ExcludedDevice{mac, world.device(mac).friendly_name, at});
          world.emit("member_rejected", {{"mac", mac.str()}, {"reason", "non-member"}});
        }
        continue;
      }
      if (!state.pending.contains(mac)) continue;
      if (first_time && roster.late_cutoff && at > *roster.late_cutoff) {
        state.mark_skipped(mac, SkipReason::late);
        world.emit("member_skipped", {{"mac", mac.str()}, {"reason", "late"}});
        continue;
      }
      if (!service_cache.contains(mac)) to_search.insert(mac);
    }

    if (!to_search.empty()) {
      const auto catalog = sdp::search_services(world, local, to_search, params);
      stats.searched = to_search.size();
      for (const auto& [mac, records] : catalog.services) service_cache.emplace(mac, records);
      for (const auto& mac : catalog.zero_service) {
        if (!catalog.departed.contains(mac)) service_cache.emplace(mac, std::vector<sdp::ServiceRecord>{});
      }
      for (const auto& mac : to_search) {
        auto it = service_cache.find(mac);
        if (it == service_cache.end()) continue;
        const bool has_ftp = std::any_of(it->second.begin(), it->second.end(),
                                         [](const sdp::ServiceRecord& r) { return sdp::is_ftp_service(r.service_name); });
        if (!has_ftp) {
          state.mark_skipped(mac, SkipReason::no_ftp_service);
          world.emit("member_skipped", {{"mac", mac.str()}, {"reason", "no-ftp-service"}});
        }
      }
    }

    sdp::ServiceCatalog current;
    for (const auto& mac : present) {
      auto it = service_cache.find(mac);
      if (it != service_cache.end() && !it->second.empty()) current.services.emplace(mac, it->second);
    }
    const auto targets = choose_push_target(sdp::filter_ftp(current), roster, state);

    for (const auto& target : targets) {
      ++stats.transfers;
      const int attempt = ++state.attempts[target.mac];
      obex::TransferStatus status = obex::TransferStatus::link_lost;
      SimTime finished = world.now();
      try {
        const auto link = simnet::connect(world, local, target.mac);
        obex::PushSession session(world, link);
        session.connect();
        const auto outcome = session.push_file(file.name, file.payload);
        session.disconnect();
        status = outcome.status;
        finished = outcome.finished;
      } catch (const Error& e) {
        world.emit("connect_failed", {{"mac", target.mac.str()}, {"reason", std::string(to_string(e.code()))}});
      }

      if (status == obex::TransferStatus::delivered) {
        ++stats.delivered;
        state.mark_delivered(target.mac, finished);
        world.emit("member_served", {{"attempt", std::to_string(attempt)}, {"mac", target.mac.str()}});
        continue;
      }
      ++stats.failed;
      if (status == obex::TransferStatus::refused) {
        state.mark_skipped(target.mac, SkipReason::refused);
        world.emit("member_skipped", {{"mac", target.mac.str()}, {"reason", "refused"}});
      } else if (attempt >= roster.max_retries) {
        state.mark_skipped(target.mac, SkipReason::retries_exhausted);
        world.emit("member_skipped", {{"mac", target.mac.str()}, {"reason", "retries-exhausted"}});
      }
    }
    report.iterations.push_back(stats);
    if (!state.consistent_with(roster.members)) throw std::logic_error("session state lost a member");
  }

  report.finished = world.now();
  for (const auto& mac : roster.members) {
    MemberOutcome m;
    m.mac = mac;
    if (auto it = state.first_seen.find(mac); it != state.first_seen.end()) m.first_seen = it->second;
    if (auto it = state.attempts.find(mac); it != state.attempts.end()) m.attempts = it->second;
    if (auto it = state.delivered.find(mac); it != state.delivered.end()) {
      m.outcome = Outcome::delivered;
      m.delivered_at = it->second;
    } else if (auto sk = state.skipped.find(mac); sk != state.skipped.end()) {
      switch (sk->second) {
        case SkipReason::no_ftp_service: m.outcome = Outcome::no_ftp_service; break;
        case SkipReason::late: m.outcome = Outcome::late; break;
        case SkipReason::refused: m.outcome = Outcome::refused; break;
        case SkipReason::retries_exhausted: m.outcome = Outcome::retries_exhausted; break;
      }
    } else {
      m.outcome = m.first_seen ? Outcome::window_closed : Outcome::never_discovered;
    }
    ++report.totals.by_outcome[m.outcome];
    report.members.push_back(std::move(m));
  }
  for (auto& [mac, dev] : excluded) report.non_members.push_back(std::move(dev));
  report.totals.members = roster.members.size();
  report.totals.delivered = state.delivered.size();
  report.totals.skipped = state.skipped.size();
  report.totals.pending_at_exit = state.pending.size();
  report.totals.non_members = report.non_members.size();

  world.emit("proactive_finished", {{"delivered", std::to_string(report.totals.delivered)},
                                    {"pending", std::to_string(report.totals.pending_at_exit)},
                                    {"skipped", std::to_string(report.totals.skipped)}});
  return report;
}

// ---------------------------------------------------------------------------
// Stepped demonstration

namespace {

class StepRunner {
 public:
  StepRunner(simnet::SimWorld& world, const StepConfig& config, StepReport& report)
      : world_(world), config_(config), report_(report) {}

  StepOutput& begin(int step, std::string title) {
    if (step > 0 && config_.await_advance) config_.await_advance(step);
    report_.steps.push_back(StepOutput{step, std::move(title), {}});
    return report_.steps.back();
  }

  void finish() {
    if (config_.on_step) config_.on_step(report_.steps.back());
  }

  void abort(Errc code, std::string message) {
    report_.error = code;
    report_.error_message = std::move(message);
    report_.steps.back().lines.push_back("Error (" + std::string(to_string(code)) + "): " + report_.error_message);
    finish();
  }

  simnet::SimWorld& world_;
  const StepConfig& config_;
  StepReport& report_;
};

}  // namespace

StepReport run_stepped(simnet::SimWorld& world, const StepConfig& config) {
  StepReport report;
  StepRunner run(world, config, report);
  const auto& params = world.params();

  auto& banner = run.begin(0, "Start");
  banner.lines.push_back("***** Proactive Information Delivery *****");
  banner.lines.push_back("simulated radio, seed " + std::to_string(world.seed()));
  run.finish();

  const auto* local = world.find_device(config.local);
  auto& power = run.begin(1, "Step 1. Local radio power state");
  if (local == nullptr) {
    run.abort(Errc::initiator_unknown, "local device " + config.local.str() + " is not in the world");
    return report;
  }
  power.lines.push_back(local->powered ? "Power: on" : "Power: off");
  if (!local->powered) {
    run.abort(Errc::initiator_powered_off, "local radio is powered off");
    return report;
  }
  run.finish();

  run.begin(2, "Step 2. Local device name").lines.push_back(local->friendly_name);
  run.finish();
  run.begin(3, "Step 3. Local device address").lines.push_back(local->mac.str());
  run.finish();

  auto& inquiry = run.begin(4, "Step 4. Query for nearby devices");
  inquiry.lines.push_back("Starting device inquiry...");
  const auto& result = simnet::complete_inquiry(world, simnet::start_inquiry(world, config.local, params));
  for (const auto& [mac, at] : result.discovered) report.discovered.emplace_back(mac, world.device(mac).friendly_name);
  inquiry.lines.push_back("Device inquiry complete; " + std::to_string(report.discovered.size()) +
                          " devices discovered");
  run.finish();

  auto& listing = run.begin(5, "Step 5. Discovered devices");
  for (std::size_t i = 0; i < report.discovered.size(); ++i) {
    listing.lines.push_back("Device " + std::to_string(i + 1) + ". " + report.discovered[i].second +
                            " - MAC id: " + report.discovered[i].first.str());
  }
  if (report.discovered.empty()) listing.lines.push_back("No devices discovered");
  run.finish();

  if (report.discovered.empty()) {
    for (int step : {6, 7, 8}) {
      static constexpr const char* kTitles[] = {"Step 6. Service inquiry", "Step 7. Discovered services",
                                                "Step 8. Transfer file to a device"};
      run.begin(step, kTitles[step - 6]).lines.push_back("Nothing to do: no devices discovered");
      run.finish();
    }
    return report;
  }

  auto& search = run.begin(6, "Step 6. Service inquiry");
  search.lines.push_back("Starting service inquiry...");
  std::set<MacId> targets;
  for (const auto& [mac, name] : report.discovered) targets.insert(mac);
  const auto catalog = sdp::search_services(world, config.local, targets, params);
  for (const auto& [mac, name] : report.discovered) {
    if (auto it = catalog.services.find(mac); it != catalog.services.end()) {
      report.service_counts.emplace(mac, it->second.size());
    }
  }
  for (const auto& [mac, name] : report.discovered) {
    if (report.service_counts.contains(mac)) search.lines.push_back(name);
  }
  search.lines.push_back("Service query complete; " + std::to_string(report.service_counts.size()) +
                         " devices have services:");
  for (const auto& [mac, name] : report.discovered) {
    if (auto it = report.service_counts.find(mac); it != report.service_counts.end()) {
      search.lines.push_back(name + " - Number of services: " + std::to_string(it->second));
    }
  }
  run.finish();

  auto& services = run.begin(7, "Step 7. Discovered services");
  for (const auto& [mac, name] : report.discovered) {
    auto it = catalog.services.find(mac);
    if (it == catalog.services.end()) continue;
    services.lines.push_back(name);
    for (const auto& rec : it->second) {
      services.lines.push_back("Service " + std::to_string(rec.service_id) + ". " + rec.service_name +
                               " - Connection URL: " + rec.connection_url.render());
    }
  }
  if (catalog.services.empty()) services.lines.push_back("No services discovered");
  run.finish();

  auto& push = run.begin(8, "Step 8. Transfer file to a device");
  const auto ftp = sdp::filter_ftp(catalog);
  for (const auto& [mac, rec] : ftp) {
    report.ftp_devices.push_back(mac);
    push.lines.push_back("FTP-capable: " + world.device(mac).friendly_name + " - " + rec.connection_url.render());
  }
  if (ftp.empty()) {
    run.abort(Errc::no_ftp_devices, "no FTP-capable devices discovered");
    return report;
  }

  FileSpec file;
  if (const auto* path = std::get_if<std::string>(&config.file.source)) {
    try {
      file = load_file(*path);
    } catch (const Error& e) {
      run.abort(e.code(), e.what());
      return report;
    }
    push.lines.push_back("File: " + file.name);
  } else {
    file = std::get<FileSpec>(config.file.source);
  }

  MacId target = ftp.begin()->first;
  if (config.target) {
    if (!ftp.contains(*config.target)) {
      run.abort(Errc::invalid_argument, "requested target " + config.target->str() + " is not FTP-capable");
      return report;
    }
    target = *config.target;
  }
  report.target = target;
  // The URL names the device; confirm it before connecting.
  const MacId url_mac = sdp::parse_mac_from_url(ftp.at(target).connection_url.render());
  push.lines.push_back("Pushing " + file.name + " (" + std::to_string(file.payload.size()) + " bytes) to " +
                       world.device(url_mac).friendly_name + " [" + url_mac.str() + "]");
  try {
    const auto link = simnet::connect(world, config.local, url_mac);
    obex::PushSession session(world, link);
    session.connect();
    report.transfer = session.push_file(file.name, file.payload);
    session.disconnect();
  } catch (const Error& e) {
    run.abort(e.code(), e.what());
    return report;
  }
  const auto& t = *report.transfer;
  if (t.delivered()) {
    push.lines.push_back("Transfer complete: " + std::to_string(t.payload_bytes) + " bytes in " +
                         std::to_string(t.frames_sent) + " frames, " + std::to_string(t.duration().count()) + " ms");
  } else {
    push.lines.push_back("Transfer failed: " + std::string(obex::to_string(t.status)));
  }
  run.finish();
  return report;
}

std::string StepReport::render() const {
  std::string out;
  for (const auto& s : steps) {
    out += s.title + "\n";
    for (const auto& line : s.lines) out += "  " + line + "\n";
  }
  out += "result ";
  if (error) {
    out += "aborted error=" + std::string(to_string(*error)) + " message=" + simnet::format_field_value(error_message);
  } else if (delivered()) {
    out += "delivered target=" + target->str();
  } else if (transfer) {
    out += "failed target=" + target->str() + " status=" + std::string(obex::to_string(transfer->status));
  } else {
    out += "nothing-to-do";
  }
  out += " discovered=" + std::to_string(discovered.size()) +
         " with_services=" + std::to_string(service_counts.size()) + " ftp=" + std::to_string(ftp_devices.size()) +
         "\n";
  return out;
}

}  // namespace pidsim::pidctl
