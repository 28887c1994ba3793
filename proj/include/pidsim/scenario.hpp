#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pidsim/metrics.hpp"
#include "pidsim/pidctl.hpp"
#include "pidsim/simnet.hpp"

namespace pidsim::cli {

inline constexpr int kSchemaVersion = 1;

enum class Mode { stepped, proactive };
std::string_view to_string(Mode m) noexcept;

struct Scenario {
  int schema_version = kSchemaVersion;
  std::string name;
  std::uint64_t seed = 0;
  Mode mode = Mode::proactive;
  simnet::RadioParams radio;
  simnet::RadioDevice local;
  std::vector<simnet::RadioDevice> devices;
  std::optional<pidctl::Roster> roster;
  pidctl::FileSource file;
  Duration inquiry_interval{30'000};
  std::optional<MacId> target;
  metrics::CourseUsage usage{0, 3, 17};

  // Effective configuration, one `key=value` line per setting.
  std::string describe(std::uint64_t effective_seed) const;
};

/// Parses YAML scenario text. Unknown keys, wrong types, invalid or duplicate
/// MACs and bad windows raise Error(parse_error / validation_error) whose
/// message starts with `<origin>:<line>:<column>:`. Relative file paths are
/// resolved against `base_dir`.
Scenario parse_scenario(const std::string& text, const std::string& origin = "<scenario>",
                        const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

simnet::SimWorld build_world(const Scenario& scenario, std::uint64_t seed);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::function<void(int next_step)> await_advance;
  std::function<void(const pidctl::StepOutput&)> on_step;
};

struct RunArtifacts {
  std::uint64_t seed = 0;
  std::string log;
  std::string report;
  std::optional<pidctl::StepReport> step_report;
  std::optional<pidctl::DeliveryReport> delivery_report;
  std::optional<metrics::SavingsSummary> savings;
  int exit_code = 0;
};

RunArtifacts run_scenario(const Scenario& scenario, const RunOptions& options = {});

}  // namespace pidsim::cli
