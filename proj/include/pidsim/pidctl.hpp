#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "pidsim/obex.hpp"
#include "pidsim/sdp.hpp"
#include "pidsim/simnet.hpp"

namespace pidsim::pidctl {

struct Roster {
  std::string course_id;
  std::set<MacId> members;
  SimTime course_start{0};
  Duration window_before{240'000};
  Duration window_after{240'000};
  std::optional<SimTime> late_cutoff;
  int max_retries = 3;

  SimTime window_start() const { return course_start - window_before; }
  SimTime window_end() const { return course_start + window_after; }
  // Throws Error(validation_error) on negative windows, a cutoff outside the
  // window, or max_retries < 1.
  void validate() const;
};

bool verify_member(const Roster& roster, const MacId& mac);
// Parses first, so any accepted spelling of a member MAC matches.
bool verify_member(const Roster& roster, std::string_view mac_text);

enum class SkipReason { no_ftp_service, late, refused, retries_exhausted };
std::string_view to_string(SkipReason r) noexcept;

struct SessionState {
  std::set<MacId> pending;
  std::map<MacId, SimTime> delivered;
  std::map<MacId, SkipReason> skipped;
  std::map<MacId, int> attempts;
  std::map<MacId, SimTime> first_seen;

  explicit SessionState(const std::set<MacId>& members = {}) : pending(members) {}

  void mark_delivered(const MacId& mac, SimTime at);
  void mark_skipped(const MacId& mac, SkipReason reason);
  // pending, delivered and skipped are disjoint and cover `members`.
  bool consistent_with(const std::set<MacId>& members) const;
};

struct PushTarget {
  MacId mac;
  sdp::ConnectionUrl url;
  SimTime first_seen;
};

/// members ∩ FTP-capable ∩ pending, by first-discovery time then MAC.
std::vector<PushTarget> choose_push_target(const std::map<MacId, sdp::ServiceRecord>& ftp, const Roster& roster,
                                           const SessionState& state);

struct FileSpec {
  std::string name;
  std::vector<std::uint8_t> payload;
};

// Reads a file into memory; the transmitted name is the path's base name.
FileSpec load_file(const std::string& path);

enum class Outcome { delivered, never_discovered, no_ftp_service, late, refused, retries_exhausted, window_closed };
std::string_view to_string(Outcome o) noexcept;

struct MemberOutcome {
  MacId mac;
  Outcome outcome = Outcome::never_discovered;
  std::optional<SimTime> delivered_at;
  std::optional<SimTime> first_seen;
  int attempts = 0;
};

// A discovered device that failed roster verification.
struct ExcludedDevice {
  MacId mac;
  std::string name;
  SimTime first_seen;
};

struct IterationStats {
  int index = 0;
  SimTime started;
  std::size_t discovered = 0;
  std::size_t searched = 0;
  std::size_t transfers = 0;
  std::size_t delivered = 0;
  std::size_t failed = 0;
};

struct Totals {
  std::size_t members = 0;
  std::size_t delivered = 0;
  std::size_t skipped = 0;
  std::size_t pending_at_exit = 0;
  std::map<Outcome, std::size_t> by_outcome;
  std::size_t non_members = 0;
};

struct DeliveryReport {
  Roster roster;
  std::vector<MemberOutcome> members;  // MAC order
  std::vector<ExcludedDevice> non_members;
  std::vector<IterationStats> iterations;
  Totals totals;
  SimTime finished;

  const MemberOutcome* find(const MacId& mac) const;
  std::set<MacId> delivered_set() const;
  // Stable text form; see README for the field order.
  std::string render() const;
};

/// The proactive loop: inquiry, service search on newly seen members, FTP
/// filter, roster check and sequential push, repeated every
/// `inquiry_interval` from window_start until every member is settled or
/// the window closes. Per-member failures land in the report.
DeliveryReport run_proactive(simnet::SimWorld& world, const MacId& local, const Roster& roster, const FileSpec& file,
                             const simnet::RadioParams& params, Duration inquiry_interval = Duration{30'000});

struct StepOutput {
  int step = 0;
  std::string title;
  std::vector<std::string> lines;
};

struct FileSource {
  std::variant<std::string, FileSpec> source;  // path or inline content
};

struct StepConfig {
  MacId local;
  FileSource file;
  std::optional<MacId> target;
  // Called before each of steps 1..8; blocks until the operator advances.
  std::function<void(int next_step)> await_advance;
  // Called after each step with its captured output.
  std::function<void(const StepOutput&)> on_step;
};

struct StepReport {
  std::vector<StepOutput> steps;
  std::vector<std::pair<MacId, std::string>> discovered;
  std::map<MacId, std::size_t> service_counts;  // devices with >= 1 record
  std::vector<MacId> ftp_devices;
  std::optional<MacId> target;
  std::optional<obex::TransferOutcome> transfer;
  std::optional<Errc> error;
  std::string error_message;

  bool aborted() const noexcept { return error.has_value(); }
  bool delivered() const noexcept { return transfer && transfer->delivered(); }
  std::string render() const;
};

StepReport run_stepped(simnet::SimWorld& world, const StepConfig& config);

}  // namespace pidsim::pidctl
