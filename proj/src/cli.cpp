#include "pidsim/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "pidsim/metrics.hpp"
#include "pidsim/scenario.hpp"

namespace pidsim::cli {

namespace {

namespace fs = std::filesystem;

std::optional<std::uint64_t> parse_seed(const std::string& text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::io_error, "cannot write '" + path.string() + "'");
  f << content;
  if (!f) throw Error(Errc::io_error, "write failed for '" + path.string() + "'");
}

struct RunFlags {
  std::vector<std::string> scenarios;
  std::optional<std::uint64_t> seed;
  bool step = false;
  std::string report_dir;
  std::string log_file;
  int jobs = 1;
};

struct ScenarioResult {
  std::string out;
  std::string err;
  int exit_code = kExitOk;
};

ScenarioResult run_one(const std::string& path, const RunFlags& flags, std::ostream* live_out, std::istream* in,
                       std::ostream* prompt) {
  ScenarioResult result;
  try {
    const auto scenario = load_scenario(path);
    RunOptions options;
    options.seed = flags.seed;
    const std::uint64_t seed = flags.seed.value_or(scenario.seed);
    result.out += scenario.describe(seed);

    if (flags.step && scenario.mode == Mode::stepped) {
      *live_out << result.out << std::flush;
      result.out.clear();
      options.await_advance = [in, prompt](int next) {
        *prompt << "[enter] for step " << next << std::endl;
        std::string line;
        std::getline(*in, line);
      };
      options.on_step = [live_out](const pidctl::StepOutput& s) {
        *live_out << s.title << "\n";
        for (const auto& line : s.lines) *live_out << "  " << line << "\n";
        *live_out << std::flush;
      };
    }

    const auto artifacts = run_scenario(scenario, options);
    if (options.on_step) {
      // Steps were already streamed; keep only the trailing result line.
      const auto& text = artifacts.report;
      const auto pos = text.rfind("result ");
      result.out += pos == std::string::npos ? text : text.substr(pos);
    } else {
      result.out += artifacts.report;
    }

    if (!flags.report_dir.empty()) {
      fs::create_directories(flags.report_dir);
      write_file(fs::path(flags.report_dir) / (scenario.name + ".log"), artifacts.log);
      write_file(fs::path(flags.report_dir) / (scenario.name + ".report.txt"), artifacts.report);
    }
    if (!flags.log_file.empty()) write_file(flags.log_file, artifacts.log);
    result.exit_code = artifacts.exit_code;
  } catch (const Error& e) {
    result.err = "error: " + std::string(to_string(e.code())) + ": " + e.what() + "\n";
    result.exit_code = kExitError;
  } catch (const fs::filesystem_error& e) {
    result.err = "error: io-error: " + std::string(e.what()) + "\n";
    result.exit_code = kExitError;
  }
  return result;
}

int cmd_run(const RunFlags& flags, std::ostream& out, std::ostream& err, std::istream& in) {
  if (!flags.log_file.empty() && flags.scenarios.size() > 1) {
    err << "error: --log accepts a single scenario\n";
    return kExitUsage;
  }
  if (flags.step && flags.jobs > 1) {
    err << "error: --step cannot be combined with --jobs\n";
    return kExitUsage;
  }

  std::vector<ScenarioResult> results(flags.scenarios.size());
  if (flags.jobs <= 1) {
    for (std::size_t i = 0; i < flags.scenarios.size(); ++i) {
      results[i] = run_one(flags.scenarios[i], flags, &out, &in, &err);
    }
  } else {
    // Independent worlds; output is collected and printed in input order.
    for (std::size_t base = 0; base < flags.scenarios.size(); base += static_cast<std::size_t>(flags.jobs)) {
      std::vector<std::future<ScenarioResult>> batch;
      const auto end = std::min(flags.scenarios.size(), base + static_cast<std::size_t>(flags.jobs));
      for (std::size_t i = base; i < end; ++i) {
        batch.push_back(std::async(std::launch::async, [&flags, i] {
          return run_one(flags.scenarios[i], flags, nullptr, nullptr, nullptr);
        }));
      }
      for (std::size_t i = base; i < end; ++i) results[i] = batch[i - base].get();
    }
  }

  int code = kExitOk;
  for (const auto& r : results) {
    out << r.out;
    err << r.err;
    code = std::max(code, r.exit_code);
  }
  return code;
}

struct MetricsFlags {
  std::optional<std::int64_t> students, pages, weeks;
  std::optional<std::int64_t> campus, pages_each, convert;
  std::string fraction = "1/4";
};

int cmd_metrics(const MetricsFlags& f, std::ostream& out, std::ostream& err) {
  const bool course = f.students || f.pages || f.weeks;
  const bool campus = f.campus || f.pages_each;
  if (!course && !campus && !f.convert) {
    err << "error: metrics needs --students/--pages/--weeks, --campus/--pages-each, or --convert\n";
    return kExitUsage;
  }
  try {
    if (course) {
      if (!f.students || !f.pages || !f.weeks) {
        err << "error: --students, --pages and --weeks go together\n";
        return kExitUsage;
      }
      const metrics::CourseUsage usage{*f.students, *f.pages, *f.weeks};
      const auto per_week = metrics::pages_per_course({usage.students, usage.pages_per_student_week, 1});
      const auto pages = metrics::pages_per_course(usage);
      out << "course students=" << usage.students << " pages_per_student_week=" << usage.pages_per_student_week
          << " weeks=" << usage.weeks << " pages_per_week=" << per_week << " pages=" << pages
          << " reams=" << metrics::pages_to_reams(pages) << " trees=" << metrics::pages_to_trees(pages) << "\n";
    }
    if (campus) {
      if (!f.campus || !f.pages_each) {
        err << "error: --campus and --pages-each go together\n";
        return kExitUsage;
      }
      const auto fraction = metrics::parse_rational(f.fraction);
      const auto pages = metrics::campus_pages(*f.campus, fraction, *f.pages_each);
      const auto heavy = fraction * *f.campus;
      out << "campus instructors=" << *f.campus << " fraction=" << fraction.numerator() << "/"
          << fraction.denominator() << " pages_each=" << *f.pages_each << " heavy_instructors=" << heavy.numerator()
          << " pages=" << pages << " reams=" << metrics::pages_to_reams(pages)
          << " trees=" << metrics::pages_to_trees(pages) << "\n";
    }
    if (f.convert) {
      if (*f.convert < 0) throw Error(Errc::invalid_argument, "--convert must be non-negative");
      out << "convert pages=" << *f.convert << " reams=" << metrics::pages_to_reams(*f.convert)
          << " trees=" << metrics::pages_to_trees(*f.convert) << "\n";
    }
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_validate(const std::vector<std::string>& paths, std::ostream& out, std::ostream& err) {
  int code = kExitOk;
  for (const auto& p : paths) {
    try {
      const auto sc = load_scenario(p);
      out << "ok " << sc.name << " mode=" << to_string(sc.mode) << " devices=" << sc.devices.size()
          << " members=" << (sc.roster ? sc.roster->members.size() : 0) << "\n";
    } catch (const Error& e) {
      err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
      code = kExitError;
    }
  }
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in) {
  if (args.empty()) {
    err << "error: empty argument vector\n";
    return kExitUsage;
  }

  CLI::App app{"Proactive information delivery simulator", "pid-sim"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  RunFlags run_flags;
  std::string seed_text;
  auto* run = app.add_subcommand("run", "Run one or more scenarios");
  run->add_option("scenarios", run_flags.scenarios, "Scenario files")->required();
  run->add_option("--seed", seed_text, "Override the scenario seed (falls back to PID_SIM_SEED)");
  run->add_flag("--step", run_flags.step, "Wait for Enter before each stepped phase");
  run->add_option("--report", run_flags.report_dir, "Directory for <name>.log and <name>.report.txt");
  run->add_option("--log", run_flags.log_file, "Write the event log to this file");
  run->add_option("--jobs", run_flags.jobs, "Run independent scenarios in parallel")->check(CLI::Range(1, 256));

  MetricsFlags mf;
  auto* met = app.add_subcommand("metrics", "Paper-savings arithmetic");
  met->add_option("--students", mf.students, "Students in the course");
  met->add_option("--pages", mf.pages, "Pages per student per week");
  met->add_option("--weeks", mf.weeks, "Weeks in the semester");
  met->add_option("--campus", mf.campus, "Number of instructors on campus");
  met->add_option("--fraction", mf.fraction, "Fraction of heavy instructors, e.g. 1/4");
  met->add_option("--pages-each", mf.pages_each, "Pages per heavy instructor per semester");
  met->add_option("--convert", mf.convert, "Convert a page count to reams and trees");

  std::vector<std::string> validate_paths;
  auto* val = app.add_subcommand("validate", "Parse and validate scenario files");
  val->add_option("scenarios", validate_paths, "Scenario files")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (run->parsed()) {
    if (seed_text.empty()) {
      if (const char* env = std::getenv("PID_SIM_SEED"); env != nullptr) seed_text = env;
    }
    if (!seed_text.empty()) {
      run_flags.seed = parse_seed(seed_text);
      if (!run_flags.seed) {
        err << "error: seed must be an unsigned 64-bit integer, got '" << seed_text << "'\n";
        return kExitUsage;
      }
    }
    out << "pid-sim " << kVersion << "\n";
    return cmd_run(run_flags, out, err, in);
  }
  if (met->parsed()) return cmd_metrics(mf, out, err);
  return cmd_validate(validate_paths, out, err);
}

}  // namespace pidsim::cli
