#include "pidsim/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace pidsim::cli {

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << v;
  return os.str();
}

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  Error error(const YAML::Node& at, Errc code, const std::string& message) const {
    const auto mark = at.Mark();
    std::string where = origin_;
    if (mark.line >= 0) where += ":" + std::to_string(mark.line + 1) + ":" + std::to_string(mark.column + 1);
    return Error(code, where + ": " + message);
  }

  Error error(const YAML::Mark& mark, Errc code, const std::string& message) const {
    return Error(code, origin_ + ":" + std::to_string(mark.line + 1) + ":" + std::to_string(mark.column + 1) + ": " +
                           message);
  }

  void expect_map(const YAML::Node& node, const std::string& context, std::initializer_list<const char*> allowed) const {
    if (!node.IsMap()) throw error(node, Errc::parse_error, context + " must be a mapping");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      if (!keys.contains(key)) throw error(kv.first, Errc::parse_error, "unknown field '" + key + "' in " + context);
    }
  }

  template <typename T>
  T get(const YAML::Node& node, const std::string& field) const {
    if (!node.IsScalar()) throw error(node, Errc::parse_error, "field '" + field + "' must be a scalar");
    try {
      return node.as<T>();
    } catch (const YAML::BadConversion&) {
      throw error(node, Errc::parse_error, "field '" + field + "' has the wrong type");
    }
  }

  template <typename T>
  T get_or(const YAML::Node& parent, const char* field, T fallback) const {
    const auto node = parent[field];
    return node ? get<T>(node, field) : fallback;
  }

  template <typename T>
  T required(const YAML::Node& parent, const char* field, const std::string& context) const {
    const auto node = parent[field];
    if (!node) throw error(parent, Errc::parse_error, context + " is missing required field '" + field + "'");
    return get<T>(node, field);
  }

  MacId mac(const YAML::Node& node, const std::string& field) const {
    const auto text = get<std::string>(node, field);
    if (!MacId::is_valid(text)) throw error(node, Errc::validation_error, "invalid MAC id '" + text + "'");
    return MacId::parse(text);
  }

  Duration millis(const YAML::Node& parent, const char* field, Duration fallback) const {
    return Duration{get_or<std::int64_t>(parent, field, fallback.count())};
  }

  simnet::Position position(const YAML::Node& node) const {
    if (!node) return {};
    if (!node.IsSequence() || node.size() != 2) {
      throw error(node, Errc::parse_error, "position must be a two-element list [x, y]");
    }
    return {get<double>(node[0], "position"), get<double>(node[1], "position")};
  }

 private:
  std::string origin_;
};

std::vector<sdp::ServiceRecord> read_services(const Reader& r, const YAML::Node& node, const MacId& owner) {
  std::vector<sdp::ServiceRecord> out;
  if (!node) return out;
  if (!node.IsSequence()) throw r.error(node, Errc::parse_error, "services must be a list");
  std::set<std::uint32_t> ids;
  for (const auto& s : node) {
    r.expect_map(s, "service", {"id", "name", "scheme", "channel", "path"});
    sdp::ServiceRecord rec;
    const auto id = r.required<std::int64_t>(s, "id", "service");
    if (id < 1 || id > 0xFFFFFFFF) throw r.error(s["id"], Errc::validation_error, "service id must be >= 1");
    rec.service_id = static_cast<std::uint32_t>(id);
    if (!ids.insert(rec.service_id).second) {
      throw r.error(s["id"], Errc::validation_error, "duplicate service id " + std::to_string(id));
    }
    rec.service_name = r.required<std::string>(s, "name", "service");
    rec.connection_url.scheme = r.get_or<std::string>(s, "scheme", "btgoep");
    rec.connection_url.mac = owner;
    const auto channel = r.get_or<std::int64_t>(s, "channel", 1);
    if (channel < 1 || channel > 0xFFFFFFFF) throw r.error(s, Errc::validation_error, "channel must be >= 1");
    rec.connection_url.channel = static_cast<std::uint32_t>(channel);
    rec.connection_url.path = r.get_or<std::string>(s, "path", "");
    if (rec.connection_url.scheme.empty() || rec.connection_url.scheme.find_first_of(":/") != std::string::npos) {
      throw r.error(s, Errc::validation_error, "service scheme must be a plain token");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

simnet::RadioDevice read_device(const Reader& r, const YAML::Node& node, bool is_local) {
  if (is_local) {
    r.expect_map(node, "local", {"mac", "name", "position", "powered"});
  } else {
    r.expect_map(node, "device", {"mac", "name", "position", "powered", "discoverable", "arrival_ms", "departure_ms",
                                  "services", "refuse_push", "max_packet", "link_loss"});
  }
  simnet::RadioDevice dev;
  if (!node["mac"]) throw r.error(node, Errc::parse_error, "device is missing required field 'mac'");
  dev.mac = r.mac(node["mac"], "mac");
  dev.friendly_name = r.get_or<std::string>(node, "name", dev.mac.str());
  dev.position = r.position(node["position"]);
  dev.powered = r.get_or<bool>(node, "powered", true);
  if (is_local) return dev;

  dev.discoverable = r.get_or<bool>(node, "discoverable", true);
  dev.arrival = SimTime{r.get_or<std::int64_t>(node, "arrival_ms", 0)};
  if (dev.arrival.millis < 0) throw r.error(node["arrival_ms"], Errc::validation_error, "arrival_ms must be >= 0");
  if (node["departure_ms"]) {
    dev.departure = SimTime{r.get<std::int64_t>(node["departure_ms"], "departure_ms")};
    if (!(dev.arrival < *dev.departure)) {
      throw r.error(node["departure_ms"], Errc::validation_error, "departure_ms must be after arrival_ms");
    }
  }
  dev.refuse_push = r.get_or<bool>(node, "refuse_push", false);
  const auto max_packet = r.get_or<std::int64_t>(node, "max_packet", obex::kDefaultMaxPacket);
  if (max_packet < obex::kMinMaxPacket || max_packet > 0xFFFF) {
    throw r.error(node["max_packet"], Errc::validation_error, "max_packet must lie in [255, 65535]");
  }
  dev.max_packet = static_cast<std::uint16_t>(max_packet);
  if (const auto loss = node["link_loss"]) {
    if (!loss.IsSequence()) throw r.error(loss, Errc::parse_error, "link_loss must be a list");
    for (const auto& w : loss) {
      r.expect_map(w, "link_loss window", {"from_ms", "to_ms"});
      simnet::LossWindow window{SimTime{r.required<std::int64_t>(w, "from_ms", "link_loss window")},
                                SimTime{r.required<std::int64_t>(w, "to_ms", "link_loss window")}};
      if (!(window.from < window.to)) throw r.error(w, Errc::validation_error, "link_loss window is empty");
      dev.link_loss.push_back(window);
    }
  }
  dev.services = read_services(r, node["services"], dev.mac);
  return dev;
}

}  // namespace

std::string_view to_string(Mode m) noexcept { return m == Mode::stepped ? "stepped" : "proactive"; }

std::string Scenario::describe(std::uint64_t effective_seed) const {
  std::string out;
  out += "scenario name=" + simnet::format_field_value(name) + " mode=" + std::string(to_string(mode)) +
         " seed=" + std::to_string(effective_seed) + " schema_version=" + std::to_string(schema_version) + "\n";
  out += "radio range_m=" + fmt_double(radio.range_m) +
         " inquiry_duration_ms=" + std::to_string(radio.inquiry_duration.count()) +
         " service_search_per_device_ms=" + std::to_string(radio.service_search_per_device.count()) +
         " link_rate_bps=" + std::to_string(radio.link_rate_bps) +
         " session_overhead_ms=" + std::to_string(radio.session_overhead.count()) +
         " loss_probability=" + fmt_double(radio.loss_probability) + "\n";
  out += "world local=" + local.mac.str() + " devices=" + std::to_string(devices.size()) +
         " inquiry_interval_ms=" + std::to_string(inquiry_interval.count()) + "\n";
  if (roster) {
    out += "roster course=" + simnet::format_field_value(roster->course_id) +
           " members=" + std::to_string(roster->members.size()) +
           " course_start_ms=" + std::to_string(roster->course_start.millis) +
           " window_before_ms=" + std::to_string(roster->window_before.count()) +
           " window_after_ms=" + std::to_string(roster->window_after.count()) +
           " late_cutoff_ms=" + (roster->late_cutoff ? std::to_string(roster->late_cutoff->millis) : "-") +
           " max_retries=" + std::to_string(roster->max_retries) + "\n";
  }
  return out;
}

Scenario parse_scenario(const std::string& text, const std::string& origin, const std::filesystem::path& base_dir) {
  const Reader r(origin);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw r.error(e.mark, Errc::parse_error, e.msg);
  }
  r.expect_map(root, "scenario",
               {"schema_version", "name", "seed", "mode", "radio", "local", "devices", "roster", "file",
                "inquiry_interval_ms", "target", "usage"});

  Scenario sc;
  sc.schema_version = r.required<int>(root, "schema_version", "scenario");
  if (sc.schema_version != kSchemaVersion) {
    throw r.error(root["schema_version"], Errc::validation_error,
                  "unsupported schema_version " + std::to_string(sc.schema_version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  sc.name = r.get_or<std::string>(root, "name", std::filesystem::path(origin).stem().string());
  sc.seed = r.get_or<std::uint64_t>(root, "seed", 0);
  const auto mode = r.get_or<std::string>(root, "mode", "proactive");
  if (mode == "stepped") {
    sc.mode = Mode::stepped;
  } else if (mode == "proactive") {
    sc.mode = Mode::proactive;
  } else {
    throw r.error(root["mode"], Errc::validation_error, "mode must be 'stepped' or 'proactive'");
  }

  if (const auto radio = root["radio"]) {
    r.expect_map(radio, "radio",
                 {"range_m", "inquiry_duration_ms", "service_search_per_device_ms", "link_rate_bps",
                  "session_overhead_ms", "loss_probability"});
    sc.radio.range_m = r.get_or<double>(radio, "range_m", sc.radio.range_m);
    sc.radio.inquiry_duration = r.millis(radio, "inquiry_duration_ms", sc.radio.inquiry_duration);
    sc.radio.service_search_per_device =
        r.millis(radio, "service_search_per_device_ms", sc.radio.service_search_per_device);
    sc.radio.link_rate_bps = r.get_or<std::int64_t>(radio, "link_rate_bps", sc.radio.link_rate_bps);
    sc.radio.session_overhead = r.millis(radio, "session_overhead_ms", sc.radio.session_overhead);
    sc.radio.loss_probability = r.get_or<double>(radio, "loss_probability", sc.radio.loss_probability);
    try {
      sc.radio.validate();
    } catch (const Error& e) {
      throw r.error(radio, Errc::validation_error, e.what());
    }
  }

  if (!root["local"]) throw r.error(root, Errc::parse_error, "scenario is missing required field 'local'");
  sc.local = read_device(r, root["local"], true);

  std::set<MacId> macs{sc.local.mac};
  if (const auto devices = root["devices"]) {
    if (!devices.IsSequence()) throw r.error(devices, Errc::parse_error, "devices must be a list");
    for (const auto& d : devices) {
      auto dev = read_device(r, d, false);
      if (!macs.insert(dev.mac).second) {
        throw r.error(d["mac"], Errc::validation_error, "duplicate MAC id " + dev.mac.str());
      }
      sc.devices.push_back(std::move(dev));
    }
  }

  if (const auto roster = root["roster"]) {
    r.expect_map(roster, "roster",
                 {"course_id", "members", "course_start_ms", "window_before_ms", "window_after_ms", "late_cutoff_ms",
                  "max_retries"});
    pidctl::Roster ro;
    ro.course_id = r.get_or<std::string>(roster, "course_id", "course");
    ro.course_start = SimTime{r.required<std::int64_t>(roster, "course_start_ms", "roster")};
    ro.window_before = r.millis(roster, "window_before_ms", ro.window_before);
    ro.window_after = r.millis(roster, "window_after_ms", ro.window_after);
    if (roster["late_cutoff_ms"]) ro.late_cutoff = SimTime{r.get<std::int64_t>(roster["late_cutoff_ms"], "late_cutoff_ms")};
    ro.max_retries = r.get_or<int>(roster, "max_retries", ro.max_retries);
    if (const auto members = roster["members"]) {
      if (!members.IsSequence()) throw r.error(members, Errc::parse_error, "roster members must be a list");
      for (const auto& m : members) {
        if (!ro.members.insert(r.mac(m, "members")).second) {
          throw r.error(m, Errc::validation_error, "duplicate roster member");
        }
      }
    }
    if (ro.window_start().millis < 0) {
      throw r.error(roster, Errc::validation_error, "delivery window starts before the scenario epoch");
    }
    try {
      ro.validate();
    } catch (const Error& e) {
      throw r.error(roster, Errc::validation_error, e.what());
    }
    sc.roster = std::move(ro);
  } else if (sc.mode == Mode::proactive) {
    throw r.error(root, Errc::validation_error, "proactive mode requires a roster");
  }

  if (const auto file = root["file"]) {
    r.expect_map(file, "file", {"path", "name", "content"});
    if (file["path"] && (file["name"] || file["content"])) {
      throw r.error(file, Errc::validation_error, "file takes either 'path' or 'name'+'content'");
    }
    if (file["path"]) {
      std::filesystem::path p = r.get<std::string>(file["path"], "path");
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      sc.file.source = p.string();
    } else {
      pidctl::FileSpec spec;
      spec.name = r.required<std::string>(file, "name", "file");
      const auto content = r.get_or<std::string>(file, "content", "");
      spec.payload.assign(content.begin(), content.end());
      if (spec.name.empty()) throw r.error(file, Errc::validation_error, "file name must be non-empty");
      sc.file.source = std::move(spec);
    }
  } else {
    throw r.error(root, Errc::parse_error, "scenario is missing required field 'file'");
  }

  sc.inquiry_interval = r.millis(root, "inquiry_interval_ms", sc.inquiry_interval);
  if (sc.inquiry_interval.count() <= 0) {
    throw r.error(root["inquiry_interval_ms"], Errc::validation_error, "inquiry_interval_ms must be positive");
  }
  if (root["target"]) sc.target = r.mac(root["target"], "target");

  sc.usage.students = sc.roster ? static_cast<std::int64_t>(sc.roster->members.size()) : 0;
  if (const auto usage = root["usage"]) {
    r.expect_map(usage, "usage", {"pages_per_week", "weeks"});
    sc.usage.pages_per_student_week = r.get_or<std::int64_t>(usage, "pages_per_week", sc.usage.pages_per_student_week);
    sc.usage.weeks = r.get_or<std::int64_t>(usage, "weeks", sc.usage.weeks);
    if (sc.usage.pages_per_student_week < 0 || sc.usage.weeks < 0) {
      throw r.error(usage, Errc::validation_error, "usage values must be non-negative");
    }
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::file_not_found, "cannot read scenario '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  auto sc = parse_scenario(text.str(), path.string(), path.parent_path());
  if (sc.name.empty()) sc.name = path.stem().string();
  return sc;
}

simnet::SimWorld build_world(const Scenario& scenario, std::uint64_t seed) {
  simnet::SimWorld world(seed, scenario.radio);
  world.add_device(scenario.local);
  for (const auto& d : scenario.devices) world.add_device(d);
  return world;
}

RunArtifacts run_scenario(const Scenario& scenario, const RunOptions& options) {
  RunArtifacts out;
  out.seed = options.seed.value_or(scenario.seed);
  auto world = build_world(scenario, out.seed);

  if (scenario.mode == Mode::stepped) {
    pidctl::StepConfig config;
    config.local = scenario.local.mac;
    config.file = scenario.file;
    config.target = scenario.target;
    config.await_advance = options.await_advance;
    config.on_step = options.on_step;
    out.step_report = pidctl::run_stepped(world, config);
    out.report = out.step_report->render();
  } else {
    pidctl::FileSpec file;
    if (const auto* path = std::get_if<std::string>(&scenario.file.source)) {
      file = pidctl::load_file(*path);
    } else {
      file = std::get<pidctl::FileSpec>(scenario.file.source);
    }
    out.delivery_report =
        pidctl::run_proactive(world, scenario.local.mac, *scenario.roster, file, scenario.radio, scenario.inquiry_interval);
    out.savings = metrics::savings_report(*out.delivery_report, scenario.usage);
    out.report = out.delivery_report->render() + out.savings->render();
  }
  out.log = world.render_log();
  return out;
}

}  // namespace pidsim::cli
