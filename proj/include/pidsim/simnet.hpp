#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "pidsim/error.hpp"
#include "pidsim/service_record.hpp"
#include "pidsim/types.hpp"

namespace pidsim::simnet {

struct Position {
  double x = 0.0;
  double y = 0.0;
};

struct RadioParams {
  double range_m = 10.0;
  Duration inquiry_duration{16'000};
  Duration service_search_per_device{2'000};
  std::int64_t link_rate_bps = 3'000'000;
  Duration session_overhead{100};
  // Per-transfer failure probability; 0 disables random loss entirely.
  double loss_probability = 0.0;

  // Throws Error(invalid_argument) unless every quantity is strictly positive
  // and loss_probability is in [0, 1].
  void validate() const;
};

// Half-open interval [from, to) during which a device's links drop frames.
struct LossWindow {
  SimTime from;
  SimTime to;
};

// Server-side reassembly state for an in-progress PUT sequence.
struct InboundPut {
  bool active = false;
  std::string name;
  std::optional<std::uint32_t> declared_length;
  std::vector<std::uint8_t> buffer;
};

struct RadioDevice {
  MacId mac;
  std::string friendly_name;
  bool powered = true;
  bool discoverable = true;
  Position position;
  std::vector<sdp::ServiceRecord> services;
  SimTime arrival{0};
  std::optional<SimTime> departure;

  bool refuse_push = false;
  std::vector<LossWindow> link_loss;
  std::uint16_t max_packet = 1024;

  std::map<std::string, std::vector<std::uint8_t>> inbox;
  InboundPut inbound;

  bool present_at(SimTime t) const noexcept { return arrival <= t && (!departure || t < *departure); }
  bool discoverable_at(SimTime t) const noexcept { return powered && discoverable && present_at(t); }
};

struct Piconet {
  MacId master;
  std::set<MacId> slaves;
};

inline constexpr std::size_t kMaxActiveSlaves = 7;

/// One line of the event log.
///
/// Rendered as `t=<millis> seq=<n> ev=<name> key=value ...` with keys in
/// lexicographic order. Values containing a space, '"', '=' or '\' (or an
/// empty value) are wrapped in double quotes with '"' and '\' escaped.
struct LogEntry {
  SimTime time;
  std::uint64_t seq = 0;
  std::string event;
  std::map<std::string, std::string> fields;

  std::string render() const;
};

std::string render_log(const std::vector<LogEntry>& entries);

// Value as it appears after `key=` in a log line (quoted when needed).
std::string format_field_value(const std::string& value);

struct LinkHandle {
  MacId master;
  MacId slave;
  std::uint64_t id = 0;
};

struct InquiryHandle {
  std::uint64_t id = 0;
  MacId initiator;
  SimTime started;
  SimTime completes;
  // Scheduled response instant for every other device known at start.
  std::map<MacId, SimTime> response_times;
};

struct InquiryResult {
  bool completed = false;
  // Discovery order: (device, response instant).
  std::vector<std::pair<MacId, SimTime>> discovered;
};

// A named event with no side effects beyond its log line.
struct Marker {
  std::string name;
  std::map<std::string, std::string> fields;
};

class SimWorld {
 public:
  explicit SimWorld(std::uint64_t seed, RadioParams params = {});

  SimTime now() const noexcept { return now_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const RadioParams& params() const noexcept { return params_; }

  // Schedules arrival/departure events when they lie in the future.
  void add_device(RadioDevice device);
  const RadioDevice& device(const MacId& mac) const;
  RadioDevice& device(const MacId& mac);
  const RadioDevice* find_device(const MacId& mac) const noexcept;
  const std::map<MacId, RadioDevice>& devices() const noexcept { return devices_; }
  void set_powered(const MacId& mac, bool powered);

  void schedule_marker(SimTime at, Marker marker);

  // Processes every queued event with time <= until, then sets now = until.
  std::vector<LogEntry> advance(SimTime until);

  // Appends a log line stamped with the current time.
  const LogEntry& emit(std::string event, std::map<std::string, std::string> fields = {});
  const std::vector<LogEntry>& log() const noexcept { return log_; }
  std::string render_log() const { return simnet::render_log(log_); }

  std::uint64_t draw() { return rng_(); }
  // Uniform in [0, 1).
  double draw_unit();

  // Inquiry bookkeeping, driven by start_inquiry().
  InquiryHandle begin_inquiry(const MacId& initiator, const RadioParams& params);
  const InquiryResult& inquiry_result(std::uint64_t id) const;
  const std::set<MacId>& discovered_by(const MacId& initiator) const;

  // Piconet bookkeeping, driven by connect()/disconnect().
  LinkHandle open_link(const MacId& master, const MacId& slave);
  void close_link(const LinkHandle& link, std::string_view reason);
  bool link_open(const LinkHandle& link) const noexcept;
  const std::map<MacId, Piconet>& piconets() const noexcept { return piconets_; }
  std::size_t peak_slaves() const noexcept { return peak_slaves_; }

 private:
  struct DiscoveryProbe {
    std::uint64_t inquiry;
    MacId target;
  };
  struct InquiryDone {
    std::uint64_t inquiry;
  };
  struct DeviceArrives {
    MacId mac;
  };
  struct DeviceDeparts {
    MacId mac;
  };
  using Payload = std::variant<Marker, DiscoveryProbe, InquiryDone, DeviceArrives, DeviceDeparts>;

  struct Scheduled {
    SimTime at;
    std::uint64_t seq;
    Payload payload;
  };
  struct Later {
    bool operator()(const Scheduled& a, const Scheduled& b) const noexcept {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  struct InquiryState {
    MacId initiator;
    RadioParams params;
    InquiryResult result;
  };

  void schedule(SimTime at, Payload payload);
  void dispatch(const Payload& payload);
  void check_piconet_cap() const;

  SimTime now_{0};
  std::uint64_t seed_;
  RadioParams params_;
  std::mt19937_64 rng_;
  std::map<MacId, RadioDevice> devices_;
  std::priority_queue<Scheduled, std::vector<Scheduled>, Later> queue_;
  std::uint64_t next_event_seq_ = 0;
  std::vector<LogEntry> log_;
  std::map<std::uint64_t, InquiryState> inquiries_;
  std::map<MacId, std::set<MacId>> discovered_;
  std::map<MacId, Piconet> piconets_;
  std::map<std::uint64_t, LinkHandle> links_;
  std::uint64_t next_inquiry_ = 1;
  std::uint64_t next_link_ = 1;
  std::size_t peak_slaves_ = 0;
};

bool in_range(const RadioDevice& a, const RadioDevice& b, const RadioParams& params);

InquiryHandle start_inquiry(SimWorld& world, const MacId& initiator, const RadioParams& params);

// Runs the world to the inquiry's completion instant and returns its result.
const InquiryResult& complete_inquiry(SimWorld& world, const InquiryHandle& handle);

LinkHandle connect(SimWorld& world, const MacId& master, const MacId& slave);
void disconnect(SimWorld& world, const LinkHandle& link);

// session_overhead + ceil(bytes * 8 / link_rate_bps seconds), in ms.
Duration transfer_duration(std::uint64_t bytes, const RadioParams& params);

}  // namespace pidsim::simnet
