#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>

namespace pidsim {

using Duration = std::chrono::milliseconds;

// Milliseconds since scenario epoch.
struct SimTime {
  std::int64_t millis = 0;

  constexpr SimTime() = default;
  constexpr explicit SimTime(std::int64_t ms) : millis(ms) {}

  constexpr auto operator<=>(const SimTime&) const = default;

  constexpr SimTime operator+(Duration d) const { return SimTime{millis + d.count()}; }
  constexpr SimTime operator-(Duration d) const { return SimTime{millis - d.count()}; }
  constexpr Duration operator-(SimTime other) const { return Duration{millis - other.millis}; }
  constexpr SimTime& operator+=(Duration d) {
    millis += d.count();
    return *this;
  }
};

inline std::ostream& operator<<(std::ostream& os, SimTime t) { return os << t.millis << "ms"; }

/// 48-bit device address held as 12 uppercase hex digits.
///
/// `parse` accepts upper or lower case and optional ':' / '-' separators;
/// the stored form is always canonical, so comparing two MacId values is a
/// canonical-form comparison.
class MacId {
 public:
  MacId() = default;

  static MacId parse(std::string_view text);
  static bool is_valid(std::string_view text) noexcept;

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  auto operator<=>(const MacId&) const = default;

 private:
  explicit MacId(std::string canonical) : value_(std::move(canonical)) {}
  std::string value_;
};

inline std::ostream& operator<<(std::ostream& os, const MacId& m) { return os << m.str(); }

}  // namespace pidsim

template <>
struct std::hash<pidsim::MacId> {
  std::size_t operator()(const pidsim::MacId& m) const noexcept { return std::hash<std::string>{}(m.str()); }
};
