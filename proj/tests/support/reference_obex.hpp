#pragma once

// Minimal stand-alone reader for the frame layout, used to cross-check the
// codec. Deliberately shares no code with the library.

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace refobex {

struct Header {
  std::uint8_t id = 0;
  std::vector<std::uint8_t> data;  // payload only, no id or prefix
};

struct Frame {
  std::uint8_t opcode = 0;
  std::uint16_t length = 0;
  bool has_connect = false;
  std::uint8_t version = 0, flags = 0;
  std::uint16_t max_packet = 0;
  std::vector<Header> headers;
};

inline std::uint16_t be16(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint16_t>((b.at(at) << 8) | b.at(at + 1));
}

// Header encoding is carried in the top two bits of the id:
// 00 text (2-byte length), 01 byte sequence (2-byte length),
// 10 one byte, 11 four bytes.
inline Frame read(const std::vector<std::uint8_t>& b, bool connect_fields) {
  Frame f;
  if (b.size() < 3) throw std::runtime_error("short");
  f.opcode = b[0];
  f.length = be16(b, 1);
  if (f.length != b.size()) throw std::runtime_error("length field disagrees with byte count");
  std::size_t at = 3;
  if (connect_fields) {
    f.has_connect = true;
    f.version = b.at(3);
    f.flags = b.at(4);
    f.max_packet = be16(b, 5);
    at = 7;
  }
  while (at < b.size()) {
    Header h;
    h.id = b[at];
    std::size_t total = 0;
    switch (h.id >> 6) {
      case 0:
      case 1:
        total = be16(b, at + 1);
        if (total < 3) throw std::runtime_error("bad header length");
        h.data.assign(b.begin() + static_cast<long>(at + 3), b.begin() + static_cast<long>(at + total));
        break;
      case 2:
        total = 2;
        h.data.assign(b.begin() + static_cast<long>(at + 1), b.begin() + static_cast<long>(at + 2));
        break;
      default:
        total = 5;
        h.data.assign(b.begin() + static_cast<long>(at + 1), b.begin() + static_cast<long>(at + 5));
        break;
    }
    if (at + total > b.size()) throw std::runtime_error("header overruns frame");
    at += total;
    f.headers.push_back(std::move(h));
  }
  return f;
}

inline std::uint32_t be32(const std::vector<std::uint8_t>& d) {
  return (std::uint32_t{d.at(0)} << 24) | (std::uint32_t{d.at(1)} << 16) | (std::uint32_t{d.at(2)} << 8) | d.at(3);
}

struct Golden {
  std::string label;
  bool connect_response = false;
  std::vector<std::uint8_t> bytes;
};

inline std::vector<Golden> load_golden(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Golden> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto p1 = line.find('|');
    const auto p2 = line.find('|', p1 + 1);
    Golden g;
    std::istringstream label(line.substr(0, p1));
    label >> g.label;
    std::istringstream mode(line.substr(p1 + 1, p2 - p1 - 1));
    std::string m;
    mode >> m;
    g.connect_response = (m == "cresp");
    std::istringstream hex(line.substr(p2 + 1));
    std::string tok;
    while (hex >> tok) g.bytes.push_back(static_cast<std::uint8_t>(std::stoul(tok, nullptr, 16)));
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace refobex
