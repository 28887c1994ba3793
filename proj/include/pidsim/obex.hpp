#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pidsim/simnet.hpp"

namespace pidsim::obex {

using Bytes = std::vector<std::uint8_t>;

// Request and response codes share one byte space on the wire.
enum class Opcode : std::uint8_t {
  put = 0x02,
  connect = 0x80,
  disconnect = 0x81,
  put_final = 0x82,
  continue_ = 0x90,
  success = 0xA0,
  bad_request = 0xC0,
  forbidden = 0xC3,
};

namespace header_id {
inline constexpr std::uint8_t kName = 0x01;
inline constexpr std::uint8_t kBody = 0x48;
inline constexpr std::uint8_t kEndOfBody = 0x49;
inline constexpr std::uint8_t kLength = 0xC3;
inline constexpr std::uint8_t kConnectionId = 0xCB;
}  // namespace header_id

struct NameHeader {
  std::string value;
  bool operator==(const NameHeader&) const = default;
};
struct LengthHeader {
  std::uint32_t value = 0;
  bool operator==(const LengthHeader&) const = default;
};
struct BodyHeader {
  Bytes value;
  bool operator==(const BodyHeader&) const = default;
};
struct EndOfBodyHeader {
  Bytes value;
  bool operator==(const EndOfBodyHeader&) const = default;
};
struct ConnectionIdHeader {
  std::uint32_t value = 0;
  bool operator==(const ConnectionIdHeader&) const = default;
};

using ObexHeader = std::variant<NameHeader, LengthHeader, BodyHeader, EndOfBodyHeader, ConnectionIdHeader>;

// Fixed fields following opcode+length in CONNECT and its response.
struct ConnectFields {
  std::uint8_t version = 0x10;
  std::uint8_t flags = 0x00;
  std::uint16_t max_packet = 1024;
  bool operator==(const ConnectFields&) const = default;
};

struct ObexFrame {
  Opcode opcode = Opcode::put;
  std::optional<ConnectFields> connect;
  std::vector<ObexHeader> headers;

  bool operator==(const ObexFrame&) const = default;
};

inline constexpr std::size_t kFramePrefix = 3;       // opcode + 2-byte length
inline constexpr std::size_t kConnectFieldsSize = 4;  // version, flags, max packet
inline constexpr std::size_t kMaxFrameLength = 0xFFFF;
inline constexpr std::uint16_t kMinMaxPacket = 255;
inline constexpr std::uint16_t kDefaultMaxPacket = 1024;

bool is_known_opcode(std::uint8_t byte) noexcept;
std::size_t encoded_size(const ObexHeader& header) noexcept;
std::size_t encoded_size(const ObexFrame& frame) noexcept;

/// Serializes a frame; the length field is always recomputed.
/// Throws Error(oversize_frame) past 65535 bytes and Error(invalid_name)
/// for non-ASCII names.
Bytes encode_frame(const ObexFrame& frame);

enum class DecodeMode {
  standard,
  // Success/other responses to CONNECT carry ConnectFields too.
  connect_response,
};

struct DecodeResult {
  ObexFrame frame;
  std::size_t consumed = 0;
  std::size_t remainder = 0;
};

/// Decodes one frame from the front of `bytes`. Trailing bytes beyond the
/// frame's length field are left alone and reported in `remainder`.
DecodeResult decode_frame(std::span<const std::uint8_t> bytes, DecodeMode mode = DecodeMode::standard);

// Capacity of a Body/EndOfBody chunk in any frame: max_packet - 6.
std::size_t chunk_capacity(std::uint16_t max_packet) noexcept;
// Extra bytes the first frame spends on Name + Length headers.
std::size_t first_frame_extra(std::size_t name_size) noexcept;
std::size_t put_frame_count(std::size_t payload_size, std::size_t name_size, std::uint16_t max_packet);

/// Splits a payload into the PUT sequence: first frame Name+Length+chunk,
/// middle frames Body, last frame PUT-final with EndOfBody. Every frame is
/// at most max_packet bytes; all but the last are filled to max_packet.
std::vector<ObexFrame> build_put_sequence(std::string_view name, std::span<const std::uint8_t> payload,
                                          std::uint16_t max_packet);

/// Server side of the push: reassembles into device.inbox keyed by Name.
/// Returns Continue / Success / BadRequest / Forbidden frames.
ObexFrame serve_push(simnet::RadioDevice& device, const ObexFrame& frame);

enum class SessionState { idle, connected, transferring, done, failed };
std::string_view to_string(SessionState s) noexcept;

enum class TransferStatus { delivered, link_lost, refused, bad_request };
std::string_view to_string(TransferStatus s) noexcept;

struct TransferOutcome {
  TransferStatus status = TransferStatus::delivered;
  std::size_t frames_sent = 0;
  std::size_t frames_total = 0;
  std::uint64_t payload_bytes = 0;
  std::uint64_t wire_bytes = 0;
  SimTime started;
  SimTime finished;

  bool delivered() const noexcept { return status == TransferStatus::delivered; }
  Duration duration() const noexcept { return finished - started; }
};

/// Client push session over one piconet link. One transfer at a time.
class PushSession {
 public:
  PushSession(simnet::SimWorld& world, simnet::LinkHandle link, std::uint16_t max_packet = kDefaultMaxPacket);

  SessionState state() const noexcept { return state_; }
  std::uint16_t max_packet() const noexcept { return max_packet_; }
  const simnet::LinkHandle& link() const noexcept { return link_; }

  // CONNECT exchange; negotiates max_packet = min(client, server).
  void connect();
  TransferOutcome push_file(std::string_view name, std::span<const std::uint8_t> payload);
  // Sends DISCONNECT if the link is still up and releases it.
  void disconnect();

 private:
  ObexFrame exchange(const ObexFrame& request, DecodeMode response_mode = DecodeMode::standard);
  TransferOutcome fail(TransferOutcome outcome, TransferStatus status, std::string_view reason);

  simnet::SimWorld* world_;
  simnet::LinkHandle link_;
  std::uint16_t max_packet_;
  SessionState state_ = SessionState::idle;
};

inline TransferOutcome push_file(PushSession& session, std::string_view name, std::span<const std::uint8_t> payload) {
  return session.push_file(name, payload);
}

}  // namespace pidsim::obex
