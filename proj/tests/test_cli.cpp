#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pidsim/cli.hpp"
#include "pidsim/scenario.hpp"

using namespace pidsim;
using namespace pidsim::cli;

namespace fs = std::filesystem;

namespace {

const std::string kRoot = PID_SIM_SOURCE_DIR;
std::string fixture(const std::string& name) { return kRoot + "/scenarios/" + name; }

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args, const std::string& input = {}) {
  args.insert(args.begin(), "pid-sim");
  std::ostringstream out, err;
  std::istringstream in(input);
  const int code = run_cli(args, out, err, in);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// Holds PID_SIM_SEED for the duration of a test.
class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    if (value) {
      ::setenv(name, value, 1);
    } else {
      ::unsetenv(name);
    }
  }
  ~ScopedEnv() {
    if (old_) {
      ::setenv(name_, old_->c_str(), 1);
    } else {
      ::unsetenv(name_);
    }
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

const char* kMinimal = R"(schema_version: 1
mode: stepped
local:
  mac: "00A0C9140C21"
devices:
  - mac: "00179A235EDD"
    name: Laptop
    position: [3, 0]
    services:
      - id: 4
        name: File Transfer Service
file:
  name: a.txt
  content: hello
)";

Errc parse_error_code(const std::string& text, std::string* message = nullptr) {
  try {
    parse_scenario(text, "t.scn");
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  return Errc::invalid_argument;
}

}  // namespace

TEST_CASE("metrics command prints the course line", "[cli][metrics]") {
  const auto r = invoke({"metrics", "--students", "18", "--pages", "3", "--weeks", "17"});
  CHECK(r.code == kExitOk);
  CHECK(r.out == "course students=18 pages_per_student_week=3 weeks=17 pages_per_week=54 pages=918 reams=2 trees=0\n");
}

TEST_CASE("metrics command prints the campus and conversion lines", "[cli][metrics]") {
  auto r = invoke({"metrics", "--campus", "800", "--fraction", "1/4", "--pages-each", "1836"});
  CHECK(r.code == kExitOk);
  CHECK(r.out ==
        "campus instructors=800 fraction=1/4 pages_each=1836 heavy_instructors=200 pages=367200 reams=708 trees=44\n");
  r = invoke({"metrics", "--convert", "8300"});
  CHECK(r.out == "convert pages=8300 reams=16 trees=1\n");
}

TEST_CASE("metrics usage errors", "[cli][metrics]") {
  CHECK(invoke({"metrics"}).code == kExitUsage);
  CHECK(invoke({"metrics", "--students", "18"}).code == kExitUsage);
  const auto r = invoke({"metrics", "--campus", "801", "--pages-each", "1836"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("non-integral") != std::string::npos);
  CHECK(invoke({"metrics", "--convert", "-1"}).code == kExitUsage);
}

TEST_CASE("top-level usage", "[cli]") {
  CHECK(invoke({}).code == kExitUsage);
  CHECK(invoke({"frobnicate"}).code == kExitUsage);
  CHECK(invoke({"run"}).code == kExitUsage);
  const auto v = invoke({"--version"});
  CHECK(v.code == kExitOk);
  CHECK(v.out.find("1.0.0") != std::string::npos);
}

TEST_CASE("shipped fixtures validate", "[cli][scenario]") {
  const auto r = invoke({"validate", fixture("classroom_demo.scn"), fixture("live_test.scn"), fixture("late_policy.scn"),
                      fixture("big_class.scn")});
  CHECK(r.code == kExitOk);
  CHECK(r.out ==
        "ok classroom_demo mode=stepped devices=5 members=0\n"
        "ok live_test mode=proactive devices=12 members=8\n"
        "ok late_policy mode=proactive devices=3 members=3\n"
        "ok big_class mode=proactive devices=10 members=10\n");
}

TEST_CASE("scenario parsing accepts a minimal file", "[scenario]") {
  const auto sc = parse_scenario(kMinimal, "t.scn");
  CHECK(sc.mode == Mode::stepped);
  REQUIRE(sc.devices.size() == 1);
  CHECK(sc.devices[0].services.at(0).connection_url.render() == "btgoep://00179A235EDD:1/");
  CHECK(sc.radio.range_m == 10.0);
}

TEST_CASE("scenario parsing is strict", "[scenario]") {
  std::string msg;
  CHECK(parse_error_code(std::string(kMinimal) + "colour: red\n", &msg) == Errc::parse_error);
  CHECK(msg.rfind("t.scn:15:1:", 0) == 0);

  std::string wrong_version = kMinimal;
  wrong_version.replace(wrong_version.find("schema_version: 1"), 17, "schema_version: 2");
  CHECK(parse_error_code(wrong_version) == Errc::validation_error);

  std::string bad_mac = kMinimal;
  bad_mac.replace(bad_mac.find("00179A235EDD"), 12, "00179A235EDX");
  CHECK(parse_error_code(bad_mac) != Errc::invalid_argument);

  std::string wrong_type = kMinimal;
  wrong_type.replace(wrong_type.find("[3, 0]"), 6, "near");
  CHECK(parse_error_code(wrong_type) != Errc::invalid_argument);

  CHECK(parse_error_code("schema_version: 1\nmode: sideways\n") != Errc::invalid_argument);
  CHECK(parse_error_code(": : :\n") == Errc::parse_error);
}

TEST_CASE("duplicate MACs are rejected with a location", "[scenario]") {
  try {
    load_scenario(kRoot + "/tests/fixtures/duplicate_mac.scn");
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::validation_error);
    CHECK(std::string(e.what()).find("duplicate_mac.scn:8:") != std::string::npos);
  }
}

TEST_CASE("runs are byte-identical for the same seed", "[cli][determinism]") {
  for (const auto* name : {"classroom_demo.scn", "live_test.scn", "late_policy.scn", "big_class.scn"}) {
    INFO(name);
    const auto a = invoke({"run", fixture(name)});
    const auto b = invoke({"run", fixture(name)});
    CHECK(a.code == kExitOk);
    CHECK(a.out == b.out);
  }
}

TEST_CASE("seed precedence: flag, then environment, then scenario", "[cli][seed]") {
  {
    ScopedEnv env("PID_SIM_SEED", nullptr);
    CHECK(invoke({"run", fixture("late_policy.scn")}).out.find("seed=11 ") != std::string::npos);
    CHECK(invoke({"run", fixture("late_policy.scn"), "--seed", "99"}).out.find("seed=99 ") != std::string::npos);
  }
  {
    ScopedEnv env("PID_SIM_SEED", "1234");
    CHECK(invoke({"run", fixture("late_policy.scn")}).out.find("seed=1234 ") != std::string::npos);
    CHECK(invoke({"run", fixture("late_policy.scn"), "--seed", "99"}).out.find("seed=99 ") != std::string::npos);
  }
  {
    ScopedEnv env("PID_SIM_SEED", "not-a-number");
    CHECK(invoke({"run", fixture("late_policy.scn")}).code == kExitUsage);
  }
}

TEST_CASE("report directory and log file", "[cli]") {
  ScopedEnv env("PID_SIM_SEED", nullptr);
  const auto dir = fs::temp_directory_path() / "pidsim-cli-report";
  fs::remove_all(dir);
  const auto r = invoke({"run", fixture("live_test.scn"), "--report", dir.string()});
  REQUIRE(r.code == kExitOk);
  const auto log = slurp(dir / "live_test.log");
  const auto report = slurp(dir / "live_test.report.txt");
  CHECK(log.rfind("t=", 0) == 0);
  CHECK(report.find("summary members=8 delivered=7") != std::string::npos);
  CHECK(r.out.find(report) != std::string::npos);

  const auto log_path = dir / "single.log";
  CHECK(invoke({"run", fixture("live_test.scn"), "--log", log_path.string()}).code == kExitOk);
  CHECK(slurp(log_path) == log);
  CHECK(invoke({"run", fixture("live_test.scn"), fixture("late_policy.scn"), "--log", log_path.string()}).code ==
        kExitUsage);
}

TEST_CASE("parallel batches print in input order", "[cli][jobs]") {
  ScopedEnv env("PID_SIM_SEED", nullptr);
  const std::vector<std::string> files = {fixture("live_test.scn"), fixture("late_policy.scn"),
                                          fixture("big_class.scn"), fixture("classroom_demo.scn")};
  auto seq_args = std::vector<std::string>{"run"};
  seq_args.insert(seq_args.end(), files.begin(), files.end());
  auto par_args = seq_args;
  par_args.insert(par_args.end(), {"--jobs", "3"});
  const auto seq = invoke(seq_args);
  const auto par = invoke(par_args);
  CHECK(seq.code == kExitOk);
  CHECK(par.out == seq.out);
}

TEST_CASE("missing and invalid scenarios exit 1", "[cli]") {
  auto r = invoke({"run", "/nonexistent/x.scn"});
  CHECK(r.code == kExitError);
  CHECK(r.err.find("file-not-found") != std::string::npos);
  r = invoke({"validate", kRoot + "/tests/fixtures/duplicate_mac.scn"});
  CHECK(r.code == kExitError);
}

TEST_CASE("step mode prompts once per phase", "[cli][step]") {
  ScopedEnv env("PID_SIM_SEED", nullptr);
  const auto r = invoke({"run", fixture("classroom_demo.scn"), "--step"}, std::string(8, '\n'));
  CHECK(r.code == kExitOk);
  std::size_t prompts = 0;
  for (auto pos = r.err.find("[enter]"); pos != std::string::npos; pos = r.err.find("[enter]", pos + 1)) ++prompts;
  CHECK(prompts == 8);
  CHECK(r.out.find("Step 8. Transfer file to a device") != std::string::npos);
  CHECK(r.out.find("result delivered target=00179A235EDD") != std::string::npos);
}

TEST_CASE("classroom demo report matches the reviewed golden file", "[cli][golden]") {
  ScopedEnv env("PID_SIM_SEED", nullptr);
  const auto r = invoke({"run", fixture("classroom_demo.scn")});
  CHECK(r.out == slurp(kRoot + "/tests/fixtures/golden/classroom_demo.out"));
}
