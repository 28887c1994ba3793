#pragma once

#include <cstdint>
#include <string>

#include <boost/rational.hpp>

#include "pidsim/error.hpp"

namespace pidsim::pidctl {
struct DeliveryReport;
}

namespace pidsim::metrics {

using Rational = boost::rational<std::int64_t>;

struct CourseUsage {
  std::int64_t students = 0;
  std::int64_t pages_per_student_week = 0;
  std::int64_t weeks = 0;
};

struct PaperConversion {
  std::int64_t pages_per_tree = 8300;
  std::int64_t reams_per_tree = 16;

  Rational pages_per_ream() const { return Rational(pages_per_tree, reams_per_tree); }
};

// Rounds half away from zero.
std::int64_t round_half_away(const Rational& value);
// Parses "a/b" or an integer into an exact rational.
Rational parse_rational(const std::string& text);

std::int64_t pages_per_course(const CourseUsage& usage);

/// instructors × heavy_fraction × pages_per_heavy_instructor. The heavy
/// instructor count must come out integral; otherwise Error(non_integral).
std::int64_t campus_pages(std::int64_t instructors, const Rational& heavy_fraction,
                          std::int64_t pages_per_heavy_instructor);

std::int64_t pages_to_reams(std::int64_t pages, const PaperConversion& c = {});
std::int64_t pages_to_trees(std::int64_t pages, const PaperConversion& c = {});

struct SavingsSummary {
  std::int64_t delivered = 0;
  std::int64_t pages = 0;
  std::int64_t reams = 0;
  std::int64_t trees = 0;
  CourseUsage usage;
  PaperConversion conversion;

  std::string render() const;
};

SavingsSummary savings_for(std::int64_t delivered, const CourseUsage& usage, const PaperConversion& c = {});
SavingsSummary savings_report(const pidctl::DeliveryReport& report, const CourseUsage& usage,
                              const PaperConversion& c = {});

}  // namespace pidsim::metrics
