#include "pidsim/metrics.hpp"

#include <charconv>

#include "pidsim/error.hpp"
#include "pidsim/pidctl.hpp"

namespace pidsim::metrics {

namespace {

void require_non_negative(std::int64_t v, const char* what) {
  if (v < 0) throw Error(Errc::invalid_argument, std::string(what) + " must be non-negative");
}

std::int64_t parse_int(std::string_view text, const std::string& whole) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(Errc::invalid_argument, "not a rational number: '" + whole + "'");
  }
  return v;
}

}  // namespace

std::int64_t round_half_away(const Rational& value) {
  // boost::rational keeps the denominator positive.
  const std::int64_t num = value.numerator();
  const std::int64_t den = value.denominator();
  const std::int64_t magnitude = ((num < 0 ? -num : num) * 2 + den) / (2 * den);
  return num < 0 ? -magnitude : magnitude;
}

Rational parse_rational(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return Rational(parse_int(text, text));
  const auto den = parse_int(std::string_view(text).substr(slash + 1), text);
  if (den == 0) throw Error(Errc::invalid_argument, "zero denominator in '" + text + "'");
  return Rational(parse_int(std::string_view(text).substr(0, slash), text), den);
}

std::int64_t pages_per_course(const CourseUsage& usage) {
  require_non_negative(usage.students, "students");
  require_non_negative(usage.pages_per_student_week, "pages per week");
  require_non_negative(usage.weeks, "weeks");
  return usage.students * usage.pages_per_student_week * usage.weeks;
}

std::int64_t campus_pages(std::int64_t instructors, const Rational& heavy_fraction,
                          std::int64_t pages_per_heavy_instructor) {
  require_non_negative(instructors, "instructors");
  require_non_negative(pages_per_heavy_instructor, "pages per instructor");
  if (heavy_fraction < 0 || heavy_fraction > 1) {
    throw Error(Errc::invalid_argument, "heavy fraction must lie in [0, 1]");
  }
  const Rational heavy = heavy_fraction * instructors;
  if (heavy.denominator() != 1) {
    throw Error(Errc::non_integral, std::to_string(instructors) + " instructors x " +
                                        std::to_string(heavy_fraction.numerator()) + "/" +
                                        std::to_string(heavy_fraction.denominator()) + " is not a whole count");
  }
  return heavy.numerator() * pages_per_heavy_instructor;
}

std::int64_t pages_to_reams(std::int64_t pages, const PaperConversion& c) {
  return round_half_away(Rational(pages) / c.pages_per_ream());
}

std::int64_t pages_to_trees(std::int64_t pages, const PaperConversion& c) {
  return round_half_away(Rational(pages, c.pages_per_tree));
}

std::string SavingsSummary::render() const {
  return "savings delivered=" + std::to_string(delivered) + " pages=" + std::to_string(pages) +
         " reams=" + std::to_string(reams) + " trees=" + std::to_string(trees) +
         " pages_per_week=" + std::to_string(usage.pages_per_student_week) + " weeks=" + std::to_string(usage.weeks) +
         " pages_per_tree=" + std::to_string(conversion.pages_per_tree) +
         " reams_per_tree=" + std::to_string(conversion.reams_per_tree) + "\n";
}

SavingsSummary savings_for(std::int64_t delivered, const CourseUsage& usage, const PaperConversion& c) {
  SavingsSummary s;
  s.delivered = delivered;
  s.usage = usage;
  s.conversion = c;
  s.pages = pages_per_course(CourseUsage{delivered, usage.pages_per_student_week, usage.weeks});
  s.reams = pages_to_reams(s.pages, c);
  s.trees = pages_to_trees(s.pages, c);
  return s;
}

SavingsSummary savings_report(const pidctl::DeliveryReport& report, const CourseUsage& usage,
                              const PaperConversion& c) {
  return savings_for(static_cast<std::int64_t>(report.totals.delivered), usage, c);
}

}  // namespace pidsim::metrics
