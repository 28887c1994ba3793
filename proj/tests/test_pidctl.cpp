#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "gen.hpp"
#include "pidsim/pidctl.hpp"

using namespace pidsim;
using namespace pidsim::pidctl;

namespace {

const MacId kLocal = MacId::parse("00A0C9140C21");

simnet::RadioDevice phone(std::string_view mac, bool ftp = true) {
  simnet::RadioDevice d;
  d.mac = MacId::parse(mac);
  d.friendly_name = "phone-" + std::string(mac.substr(8));
  d.position = {2, 1};
  if (ftp) d.services.push_back({4, "File Transfer Service", {"btgoep", d.mac, 4, ""}});
  d.services.push_back({1, "Object Push", {"btgoep", d.mac, 1, ""}});
  return d;
}

simnet::SimWorld world_with(std::vector<simnet::RadioDevice> devs, std::uint64_t seed = 1) {
  simnet::SimWorld w(seed);
  simnet::RadioDevice local;
  local.mac = kLocal;
  local.friendly_name = "instructor";
  w.add_device(local);
  for (auto& d : devs) w.add_device(d);
  return w;
}

Roster roster_of(std::initializer_list<std::string_view> macs) {
  Roster r;
  r.course_id = "CS101";
  r.course_start = SimTime{240'000};
  for (auto m : macs) r.members.insert(MacId::parse(m));
  return r;
}

FileSpec notes() { return {"notes.txt", std::vector<std::uint8_t>(2000, 'n')}; }

}  // namespace

TEST_CASE("roster membership", "[pidctl]") {
  const auto r = roster_of({"002369E1F101"});
  CHECK(verify_member(r, MacId::parse("002369E1F101")));
  CHECK(verify_member(r, "00:23:69:e1:f1:01"));
  CHECK_FALSE(verify_member(r, "002369E1F102"));
  CHECK_FALSE(verify_member(r, "garbage"));
  CHECK_FALSE(verify_member(Roster{}, "002369E1F101"));
}

TEST_CASE("roster validation", "[pidctl]") {
  auto r = roster_of({});
  CHECK_NOTHROW(r.validate());
  r.late_cutoff = SimTime{900'000};
  CHECK_THROWS_AS(r.validate(), Error);
  r.late_cutoff.reset();
  r.max_retries = 0;
  CHECK_THROWS_AS(r.validate(), Error);
}

TEST_CASE("session state transitions", "[pidctl]") {
  const std::set<MacId> members{MacId::parse("002369E1F101"), MacId::parse("002369E1F102")};
  SessionState s(members);
  s.mark_delivered(MacId::parse("002369E1F101"), SimTime{5});
  s.mark_skipped(MacId::parse("002369E1F102"), SkipReason::late);
  CHECK(s.pending.empty());
  CHECK(s.consistent_with(members));
  CHECK_THROWS(s.mark_delivered(MacId::parse("002369E1F101"), SimTime{6}));
}

TEST_CASE("push targets are ordered by first sighting then MAC", "[pidctl]") {
  const auto a = MacId::parse("002369E1F101"), b = MacId::parse("002369E1F102"), c = MacId::parse("002369E1F103"),
             x = MacId::parse("0025BC99D008");
  auto r = roster_of({"002369E1F101", "002369E1F102", "002369E1F103"});
  SessionState s(r.members);
  s.first_seen = {{a, SimTime{900}}, {b, SimTime{100}}, {c, SimTime{100}}, {x, SimTime{1}}};
  std::map<MacId, sdp::ServiceRecord> ftp;
  for (const auto& m : {a, b, c, x}) ftp[m] = {1, "File Transfer", {"btgoep", m, 1, ""}};
  auto t = choose_push_target(ftp, r, s);
  REQUIRE(t.size() == 3);
  CHECK(t[0].mac == b);
  CHECK(t[1].mac == c);
  CHECK(t[2].mac == a);
  s.mark_delivered(b, SimTime{200});
  t = choose_push_target(ftp, r, s);
  REQUIRE(t.size() == 2);
  CHECK(t[0].mac == c);
}

TEST_CASE("push target choice never includes outsiders", "[pidctl][property]") {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    testgen::Gen g(seed);
    Roster r;
    SessionState s;
    std::map<MacId, sdp::ServiceRecord> ftp;
    for (auto n = g.between(0, 12); n > 0; --n) {
      const auto m = g.mac();
      if (g.chance(60)) r.members.insert(m);
      if (g.chance(70)) ftp[m] = {1, "File Transfer", {"btgoep", m, 1, ""}};
      s.first_seen[m] = SimTime{g.between(0, 5)};
    }
    s.pending = r.members;
    for (const auto& m : r.members) {
      if (g.chance(30)) s.pending.erase(m);
    }
    const auto t = choose_push_target(ftp, r, s);
    std::size_t expected = 0;
    for (const auto& [m, rec] : ftp) expected += (r.members.contains(m) && s.pending.contains(m)) ? 1 : 0;
    INFO("seed " << seed);
    REQUIRE(t.size() == expected);
    for (std::size_t i = 0; i < t.size(); ++i) {
      REQUIRE(r.members.contains(t[i].mac));
      REQUIRE(s.pending.contains(t[i].mac));
      if (i > 0) {
        REQUIRE((t[i - 1].first_seen < t[i].first_seen ||
                 (t[i - 1].first_seen == t[i].first_seen && t[i - 1].mac < t[i].mac)));
      }
    }
  }
}

TEST_CASE("load_file", "[pidctl]") {
  const auto dir = std::filesystem::temp_directory_path() / "pidsim-load-file";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "cpi.txt", std::ios::binary) << "abc";
  }
  const auto f = load_file((dir / "cpi.txt").string());
  CHECK(f.name == "cpi.txt");
  CHECK(f.payload == std::vector<std::uint8_t>{'a', 'b', 'c'});
  try {
    load_file((dir / "missing.txt").string());
    FAIL("expected file-not-found");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::file_not_found);
  }
}

TEST_CASE("empty roster finishes without any iteration", "[pidctl][proactive]") {
  auto w = world_with({phone("002369E1F101")});
  const auto rep = run_proactive(w, kLocal, roster_of({}), notes(), w.params());
  CHECK(rep.iterations.empty());
  CHECK(rep.members.empty());
  CHECK(rep.totals.delivered == 0);
  CHECK(w.device(MacId::parse("002369E1F101")).inbox.empty());
}

TEST_CASE("members present from the start are all served in the first iteration", "[pidctl][proactive]") {
  auto w = world_with({phone("002369E1F101"), phone("002369E1F102"), phone("002369E1F103")});
  const auto rep =
      run_proactive(w, kLocal, roster_of({"002369E1F101", "002369E1F102", "002369E1F103"}), notes(), w.params());
  CHECK(rep.totals.delivered == 3);
  CHECK(rep.iterations.size() == 1);
  for (const auto& m : rep.members) {
    CHECK(m.outcome == Outcome::delivered);
    CHECK(m.attempts == 1);
    CHECK(w.device(m.mac).inbox.at("notes.txt") == notes().payload);
  }
}

TEST_CASE("outsiders with FTP are excluded and never receive anything", "[pidctl][proactive]") {
  auto w = world_with({phone("002369E1F101"), phone("0025BC99D008")});
  const auto rep = run_proactive(w, kLocal, roster_of({"002369E1F101"}), notes(), w.params());
  CHECK(rep.delivered_set() == std::set<MacId>{MacId::parse("002369E1F101")});
  REQUIRE(rep.non_members.size() == 1);
  CHECK(rep.non_members[0].mac == MacId::parse("0025BC99D008"));
  CHECK(w.device(MacId::parse("0025BC99D008")).inbox.empty());
  for (const auto& e : w.log()) {
    if (e.event == "link_opened") CHECK(e.fields.at("slave") != "0025BC99D008");
  }
}

TEST_CASE("member outcomes for each failure class", "[pidctl][proactive]") {
  auto no_ftp = phone("002369E1F102", false);
  auto none = phone("002369E1F103");
  none.services.clear();
  auto far = phone("002369E1F104");
  far.position = {30, 0};
  auto refuser = phone("002369E1F105");
  refuser.refuse_push = true;
  auto lossy = phone("002369E1F106");
  lossy.link_loss.push_back({SimTime{0}, SimTime{10'000'000}});
  auto w = world_with({phone("002369E1F101"), no_ftp, none, far, refuser, lossy});
  const auto r =
      roster_of({"002369E1F101", "002369E1F102", "002369E1F103", "002369E1F104", "002369E1F105", "002369E1F106"});
  const auto rep = run_proactive(w, kLocal, r, notes(), w.params());

  auto outcome = [&](std::string_view m) { return rep.find(MacId::parse(m))->outcome; };
  CHECK(outcome("002369E1F101") == Outcome::delivered);
  CHECK(outcome("002369E1F102") == Outcome::no_ftp_service);
  CHECK(outcome("002369E1F103") == Outcome::no_ftp_service);
  CHECK(outcome("002369E1F104") == Outcome::never_discovered);
  CHECK(outcome("002369E1F105") == Outcome::refused);
  CHECK(outcome("002369E1F106") == Outcome::retries_exhausted);
  CHECK(rep.find(MacId::parse("002369E1F105"))->attempts == 1);
  CHECK(rep.find(MacId::parse("002369E1F106"))->attempts == r.max_retries);
  CHECK(w.device(lossy.mac).inbox.empty());
  // The out-of-range member keeps the loop alive until the window closes.
  CHECK(rep.totals.pending_at_exit == 1);
  CHECK(rep.finished >= r.window_end() - Duration{30'000});
}

TEST_CASE("retry budget larger than the window ends in window-closed", "[pidctl][proactive]") {
  auto lossy = phone("002369E1F101");
  lossy.link_loss.push_back({SimTime{0}, SimTime{10'000'000}});
  auto w = world_with({lossy});
  auto r = roster_of({"002369E1F101"});
  r.max_retries = 1000;
  const auto rep = run_proactive(w, kLocal, r, notes(), w.params());
  CHECK(rep.members[0].outcome == Outcome::window_closed);
  CHECK(rep.members[0].attempts == static_cast<int>(rep.iterations.size()));
  CHECK(rep.iterations.size() == 16);
}

TEST_CASE("a transient loss window costs one attempt", "[pidctl][proactive]") {
  auto flaky = phone("002369E1F101");
  flaky.link_loss.push_back({SimTime{0}, SimTime{40'000}});
  auto w = world_with({flaky});
  const auto rep = run_proactive(w, kLocal, roster_of({"002369E1F101"}), notes(), w.params());
  CHECK(rep.members[0].outcome == Outcome::delivered);
  CHECK(rep.members[0].attempts == 2);
}

TEST_CASE("late arrivals are skipped only when a cutoff is set", "[pidctl][proactive]") {
  auto late = phone("002369E1F103");
  late.arrival = SimTime{400'000};
  auto make = [&] { return world_with({phone("002369E1F101"), late}); };
  auto r = roster_of({"002369E1F101", "002369E1F103"});

  auto w1 = make();
  const auto open = run_proactive(w1, kLocal, r, notes(), w1.params());
  CHECK(open.find(late.mac)->outcome == Outcome::delivered);

  r.late_cutoff = SimTime{330'000};
  auto w2 = make();
  const auto strict = run_proactive(w2, kLocal, r, notes(), w2.params());
  CHECK(strict.find(late.mac)->outcome == Outcome::late);
  CHECK(strict.find(MacId::parse("002369E1F101"))->outcome == Outcome::delivered);
  CHECK(w2.device(late.mac).inbox.empty());
}

TEST_CASE("a member gone before the first inquiry is never discovered", "[pidctl][proactive]") {
  auto leaver = phone("002369E1F101");
  leaver.departure = SimTime{1};
  auto w = world_with({leaver});
  const auto rep = run_proactive(w, kLocal, roster_of({"002369E1F101"}), notes(), w.params());
  CHECK(rep.members[0].outcome == Outcome::never_discovered);
}

TEST_CASE("report rendering lists members in MAC order", "[pidctl][report]") {
  auto w = world_with({phone("002369E1F102"), phone("002369E1F101")});
  const auto rep = run_proactive(w, kLocal, roster_of({"002369E1F102", "002369E1F101"}), notes(), w.params());
  const auto text = rep.render();
  CHECK(text.rfind("report course=CS101 members=2 window_start=0 window_end=480000", 0) == 0);
  CHECK(text.find("member mac=002369E1F101") < text.find("member mac=002369E1F102"));
  CHECK(text.find("summary members=2 delivered=2 skipped=0 pending=0") != std::string::npos);
}

namespace {

simnet::RadioDevice laptop() {
  simnet::RadioDevice d;
  d.mac = MacId::parse("00179A235EDD");
  d.friendly_name = "EB-LAPTOP-D400";
  d.position = {6.096, 0};
  for (std::uint32_t i = 1; i <= 7; ++i) {
    d.services.push_back({i, i == 4 ? "File Transfer Service" : "Service " + std::to_string(i),
                          {"btgoep", d.mac, i, ""}});
  }
  return d;
}

StepConfig inline_config() {
  StepConfig c;
  c.local = kLocal;
  c.file.source = FileSpec{"cpi.txt", std::vector<std::uint8_t>(555, 'c')};
  return c;
}

}  // namespace

TEST_CASE("stepped run pushes to the only FTP device", "[pidctl][stepped]") {
  auto w = world_with({laptop(), phone("000761571B00", false)});
  int prompts = 0;
  auto cfg = inline_config();
  cfg.await_advance = [&](int) { ++prompts; };
  const auto rep = run_stepped(w, cfg);
  CHECK_FALSE(rep.aborted());
  CHECK(rep.delivered());
  CHECK(rep.target == MacId::parse("00179A235EDD"));
  CHECK(rep.steps.size() == 9);
  CHECK(prompts == 8);
  CHECK(rep.service_counts.at(MacId::parse("00179A235EDD")) == 7);
  CHECK(w.device(MacId::parse("00179A235EDD")).inbox.at("cpi.txt").size() == 555);
}

TEST_CASE("stepped run with no devices reports nothing to do", "[pidctl][stepped]") {
  auto w = world_with({});
  const auto rep = run_stepped(w, inline_config());
  CHECK_FALSE(rep.aborted());
  CHECK(rep.steps.size() == 9);
  CHECK(rep.steps.back().lines.at(0).find("Nothing to do") != std::string::npos);
  CHECK(rep.render().find("result nothing-to-do") != std::string::npos);
}

TEST_CASE("stepped run aborts cleanly", "[pidctl][stepped]") {
  SECTION("no FTP device") {
    auto w = world_with({phone("000761571B00", false)});
    const auto rep = run_stepped(w, inline_config());
    CHECK(rep.error == Errc::no_ftp_devices);
  }
  SECTION("missing file") {
    auto w = world_with({laptop()});
    auto cfg = inline_config();
    cfg.file.source = std::string("/nonexistent/cpi.txt");
    const auto rep = run_stepped(w, cfg);
    CHECK(rep.error == Errc::file_not_found);
    CHECK(w.device(MacId::parse("00179A235EDD")).inbox.empty());
  }
  SECTION("target without FTP") {
    auto w = world_with({laptop(), phone("000761571B00", false)});
    auto cfg = inline_config();
    cfg.target = MacId::parse("000761571B00");
    CHECK(run_stepped(w, cfg).error == Errc::invalid_argument);
  }
  SECTION("local radio off") {
    auto w = world_with({laptop()});
    w.set_powered(kLocal, false);
    CHECK(run_stepped(w, inline_config()).error == Errc::initiator_powered_off);
  }
}

TEST_CASE("stepped and proactive modes deliver the same file to the same member", "[pidctl][agreement]") {
  const auto file = std::get<FileSpec>(inline_config().file.source);
  auto ws = world_with({laptop(), phone("000761571B00", false)}, 5);
  const auto stepped = run_stepped(ws, inline_config());
  auto wp = world_with({laptop(), phone("000761571B00", false)}, 5);
  const auto proactive = run_proactive(wp, kLocal, roster_of({"00179A235EDD"}), file, wp.params());
  REQUIRE(stepped.delivered());
  CHECK(proactive.delivered_set() == std::set<MacId>{*stepped.target});
  CHECK(ws.device(*stepped.target).inbox == wp.device(*stepped.target).inbox);
}
