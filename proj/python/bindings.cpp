#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <utility>
#include <vector>

#include "pidsim/metrics.hpp"
#include "pidsim/obex.hpp"
#include "pidsim/scenario.hpp"
#include "pidsim/sdp.hpp"

namespace py = pybind11;
using namespace pidsim;

namespace {

// Python-side view of a frame: opcode plus (header id, value) pairs. Text
// headers come back as str, four-byte headers as int, the rest as bytes.
struct DecodedFrame {
  int opcode = 0;
  std::optional<int> max_packet;
  py::list headers;
  std::size_t consumed = 0;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::string log;
  std::string report;
  std::vector<std::string> delivered;
  int exit_code = 0;
};

py::bytes to_py(const obex::Bytes& b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

obex::Bytes from_py(const py::bytes& b) {
  const std::string s = b;
  return obex::Bytes(s.begin(), s.end());
}

obex::ObexHeader header_from(int id, const py::handle& value) {
  switch (id) {
    case obex::header_id::kName: return obex::NameHeader{value.cast<std::string>()};
    case obex::header_id::kLength: return obex::LengthHeader{value.cast<std::uint32_t>()};
    case obex::header_id::kConnectionId: return obex::ConnectionIdHeader{value.cast<std::uint32_t>()};
    case obex::header_id::kBody: return obex::BodyHeader{from_py(value.cast<py::bytes>())};
    case obex::header_id::kEndOfBody: return obex::EndOfBodyHeader{from_py(value.cast<py::bytes>())};
    default: throw Error(Errc::unknown_header_id, "unknown header id " + std::to_string(id));
  }
}

py::tuple header_to(const obex::ObexHeader& h) {
  return std::visit(
      [](const auto& v) -> py::tuple {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, obex::NameHeader>) return py::make_tuple(obex::header_id::kName, v.value);
        if constexpr (std::is_same_v<T, obex::LengthHeader>) return py::make_tuple(obex::header_id::kLength, v.value);
        if constexpr (std::is_same_v<T, obex::ConnectionIdHeader>) {
          return py::make_tuple(obex::header_id::kConnectionId, v.value);
        }
        if constexpr (std::is_same_v<T, obex::BodyHeader>) return py::make_tuple(obex::header_id::kBody, to_py(v.value));
        if constexpr (std::is_same_v<T, obex::EndOfBodyHeader>) {
          return py::make_tuple(obex::header_id::kEndOfBody, to_py(v.value));
        }
      },
      h);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "pid-sim core: radio world, frame codec, delivery runs and savings arithmetic";

  // The type lives as long as the module; the translator only needs its pointer.
  static PyObject* error_type = py::register_exception<Error>(m, "Error", PyExc_ValueError).ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error_type, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def("normalize_mac", [](const std::string& text) { return MacId::parse(text).str(); }, py::arg("text"),
        "Canonical 12-digit uppercase form of a MAC id.");
  m.def("parse_mac_from_url", [](const std::string& url) { return sdp::parse_mac_from_url(url).str(); },
        py::arg("url"));

  m.def(
      "transfer_duration_ms",
      [](std::uint64_t bytes, std::int64_t link_rate_bps, std::int64_t overhead_ms) {
        simnet::RadioParams p;
        p.link_rate_bps = link_rate_bps;
        p.session_overhead = Duration{overhead_ms};
        p.validate();
        return simnet::transfer_duration(bytes, p).count();
      },
      py::arg("bytes"), py::arg("link_rate_bps") = 3'000'000, py::arg("overhead_ms") = 100);

  m.def(
      "pages_per_course",
      [](std::int64_t students, std::int64_t pages, std::int64_t weeks) {
        return metrics::pages_per_course({students, pages, weeks});
      },
      py::arg("students"), py::arg("pages_per_week"), py::arg("weeks"));
  m.def(
      "campus_pages",
      [](std::int64_t instructors, const std::string& fraction, std::int64_t pages_each) {
        return metrics::campus_pages(instructors, metrics::parse_rational(fraction), pages_each);
      },
      py::arg("instructors"), py::arg("fraction"), py::arg("pages_each"));
  m.def("pages_to_reams", [](std::int64_t pages) { return metrics::pages_to_reams(pages); }, py::arg("pages"));
  m.def("pages_to_trees", [](std::int64_t pages) { return metrics::pages_to_trees(pages); }, py::arg("pages"));

  m.def("put_frame_count", &obex::put_frame_count, py::arg("payload_size"), py::arg("name_size"),
        py::arg("max_packet") = obex::kDefaultMaxPacket);

  m.def(
      "encode_frame",
      [](int opcode, const py::list& headers, std::optional<int> max_packet) {
        if (!obex::is_known_opcode(static_cast<std::uint8_t>(opcode))) {
          throw Error(Errc::unknown_opcode, "unknown opcode " + std::to_string(opcode));
        }
        obex::ObexFrame f;
        f.opcode = static_cast<obex::Opcode>(opcode);
        if (max_packet) f.connect = obex::ConnectFields{0x10, 0x00, static_cast<std::uint16_t>(*max_packet)};
        for (const auto& item : headers) {
          const auto pair = item.cast<py::tuple>();
          f.headers.push_back(header_from(pair[0].cast<int>(), pair[1]));
        }
        return to_py(obex::encode_frame(f));
      },
      py::arg("opcode"), py::arg("headers") = py::list(), py::arg("max_packet") = py::none(),
      "Encode a frame. `max_packet` adds CONNECT fields (version 1.0, flags 0).");

  py::class_<DecodedFrame>(m, "DecodedFrame")
      .def_readonly("opcode", &DecodedFrame::opcode)
      .def_readonly("max_packet", &DecodedFrame::max_packet)
      .def_readonly("headers", &DecodedFrame::headers)
      .def_readonly("consumed", &DecodedFrame::consumed);

  m.def(
      "decode_frame",
      [](const py::bytes& data, bool connect_response) {
        const auto bytes = from_py(data);
        const auto r = obex::decode_frame(
            bytes, connect_response ? obex::DecodeMode::connect_response : obex::DecodeMode::standard);
        DecodedFrame out;
        out.opcode = static_cast<int>(r.frame.opcode);
        if (r.frame.connect) out.max_packet = r.frame.connect->max_packet;
        for (const auto& h : r.frame.headers) out.headers.append(header_to(h));
        out.consumed = r.consumed;
        return out;
      },
      py::arg("data"), py::arg("connect_response") = false);

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("seed", &RunResult::seed)
      .def_readonly("log", &RunResult::log)
      .def_readonly("report", &RunResult::report)
      .def_readonly("delivered", &RunResult::delivered)
      .def_readonly("exit_code", &RunResult::exit_code);

  m.def(
      "run_scenario",
      [](const std::string& path, std::optional<std::uint64_t> seed) {
        const auto sc = cli::load_scenario(path);
        cli::RunOptions opt;
        opt.seed = seed;
        cli::RunArtifacts art;
        {
          py::gil_scoped_release release;
          art = cli::run_scenario(sc, opt);
        }
        RunResult out{art.seed, art.log, art.report, {}, art.exit_code};
        if (art.delivery_report) {
          for (const auto& mac : art.delivery_report->delivered_set()) out.delivered.push_back(mac.str());
        } else if (art.step_report && art.step_report->delivered()) {
          out.delivered.push_back(art.step_report->target->str());
        }
        return out;
      },
      py::arg("path"), py::arg("seed") = py::none());

  m.def(
      "validate_scenario",
      [](const std::string& path) {
        const auto sc = cli::load_scenario(path);
        return py::dict(py::arg("name") = sc.name, py::arg("mode") = std::string(cli::to_string(sc.mode)),
                        py::arg("devices") = sc.devices.size(),
                        py::arg("members") = sc.roster ? sc.roster->members.size() : 0);
      },
      py::arg("path"));
}
