#include "pidsim/obex.hpp"

#include <algorithm>

namespace pidsim::obex {

namespace {

void put_u16(Bytes& out, std::size_t v) {
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

void check_name(std::string_view name) {
  for (char c : name) {
    const auto u = static_cast<unsigned char>(c);
    if (u == 0 || u > 0x7F) throw Error(Errc::invalid_name, "object names must be printable ASCII");
  }
}

void put_prefixed(Bytes& out, std::uint8_t id, std::span<const std::uint8_t> data) {
  const std::size_t total = 3 + data.size();
  if (total > kMaxFrameLength) throw Error(Errc::oversize_frame, "header exceeds 65535 bytes");
  out.push_back(id);
  put_u16(out, total);
  out.insert(out.end(), data.begin(), data.end());
}

Error mismatch(const std::string& what) { return Error(Errc::length_mismatch, what); }

ObexFrame response(Opcode op) { return ObexFrame{op, std::nullopt, {}}; }

void reset_inbound(simnet::RadioDevice& device) { device.inbound = simnet::InboundPut{}; }

}  // namespace

bool is_known_opcode(std::uint8_t byte) noexcept {
  switch (static_cast<Opcode>(byte)) {
    case Opcode::put:
    case Opcode::connect:
    case Opcode::disconnect:
    case Opcode::put_final:
    case Opcode::continue_:
    case Opcode::success:
    case Opcode::bad_request:
    case Opcode::forbidden:
      return true;
  }
  return false;
}

std::size_t encoded_size(const ObexHeader& header) noexcept {
  return std::visit(
      [](const auto& h) -> std::size_t {
        using T = std::decay_t<decltype(h)>;
        if constexpr (std::is_same_v<T, LengthHeader> || std::is_same_v<T, ConnectionIdHeader>) {
          return 5;
        } else {
          return 3 + h.value.size();
        }
      },
      header);
}

std::size_t encoded_size(const ObexFrame& frame) noexcept {
  std::size_t n = kFramePrefix + (frame.connect ? kConnectFieldsSize : 0);
  for (const auto& h : frame.headers) n += encoded_size(h);
  return n;
}

Bytes encode_frame(const ObexFrame& frame) {
  const std::size_t total = encoded_size(frame);
  if (total > kMaxFrameLength) {
    throw Error(Errc::oversize_frame, "frame of " + std::to_string(total) + " bytes exceeds 65535");
  }
  Bytes out;
  out.reserve(total);
  out.push_back(static_cast<std::uint8_t>(frame.opcode));
  put_u16(out, total);
  if (frame.connect) {
    out.push_back(frame.connect->version);
    out.push_back(frame.connect->flags);
    put_u16(out, frame.connect->max_packet);
  }
  for (const auto& header : frame.headers) {
    std::visit(
        [&out](const auto& h) {
          using T = std::decay_t<decltype(h)>;
          if constexpr (std::is_same_v<T, NameHeader>) {
            check_name(h.value);
            put_prefixed(out, header_id::kName,
                         std::span(reinterpret_cast<const std::uint8_t*>(h.value.data()), h.value.size()));
          } else if constexpr (std::is_same_v<T, LengthHeader>) {
            out.push_back(header_id::kLength);
            put_u32(out, h.value);
          } else if constexpr (std::is_same_v<T, BodyHeader>) {
            put_prefixed(out, header_id::kBody, h.value);
          } else if constexpr (std::is_same_v<T, EndOfBodyHeader>) {
            put_prefixed(out, header_id::kEndOfBody, h.value);
          } else {
            out.push_back(header_id::kConnectionId);
            put_u32(out, h.value);
          }
        },
        header);
  }
  return out;
}

DecodeResult decode_frame(std::span<const std::uint8_t> bytes, DecodeMode mode) {
  if (bytes.size() < kFramePrefix) throw Error(Errc::truncated_frame, "frame shorter than 3 bytes");
  const std::size_t length = get_u16(bytes, 1);
  if (length < kFramePrefix) throw mismatch("length field smaller than the frame prefix");
  if (length > bytes.size()) {
    throw Error(Errc::truncated_frame, "length field " + std::to_string(length) + " exceeds " +
                                           std::to_string(bytes.size()) + " available bytes");
  }
  if (!is_known_opcode(bytes[0])) throw Error(Errc::unknown_opcode, "unknown opcode " + std::to_string(bytes[0]));

  DecodeResult result;
  auto& frame = result.frame;
  frame.opcode = static_cast<Opcode>(bytes[0]);
  const auto body = bytes.first(length);
  std::size_t pos = kFramePrefix;

  if (frame.opcode == Opcode::connect || mode == DecodeMode::connect_response) {
    if (pos + kConnectFieldsSize > length) throw mismatch("CONNECT fields run past the frame end");
    frame.connect = ConnectFields{body[pos], body[pos + 1], get_u16(body, pos + 2)};
    pos += kConnectFieldsSize;
  }

  while (pos < length) {
    const std::uint8_t id = body[pos];
    switch (id) {
      case header_id::kLength:
      case header_id::kConnectionId: {
        if (pos + 5 > length) throw mismatch("4-byte header runs past the frame end");
        const auto value = get_u32(body, pos + 1);
        if (id == header_id::kLength) {
          frame.headers.emplace_back(LengthHeader{value});
        } else {
          frame.headers.emplace_back(ConnectionIdHeader{value});
        }
        pos += 5;
        break;
      }
      case header_id::kName:
      case header_id::kBody:
      case header_id::kEndOfBody: {
        if (pos + 3 > length) throw mismatch("header prefix runs past the frame end");
        const std::size_t hlen = get_u16(body, pos + 1);
        if (hlen < 3 || pos + hlen > length) throw mismatch("header length inconsistent with frame length");
        const auto data = body.subspan(pos + 3, hlen - 3);
        if (id == header_id::kName) {
          std::string name(data.begin(), data.end());
          check_name(name);
          frame.headers.emplace_back(NameHeader{std::move(name)});
        } else if (id == header_id::kBody) {
          frame.headers.emplace_back(BodyHeader{Bytes(data.begin(), data.end())});
        } else {
          frame.headers.emplace_back(EndOfBodyHeader{Bytes(data.begin(), data.end())});
        }
        pos += hlen;
        break;
      }
      default:
        throw Error(Errc::unknown_header_id, "unknown header id " + std::to_string(id));
    }
  }
  result.consumed = length;
  result.remainder = bytes.size() - length;
  return result;
}

std::size_t chunk_capacity(std::uint16_t max_packet) noexcept { return max_packet > 6 ? max_packet - 6u : 0u; }

std::size_t first_frame_extra(std::size_t name_size) noexcept { return (3 + name_size) + 5; }

std::size_t put_frame_count(std::size_t payload_size, std::size_t name_size, std::uint16_t max_packet) {
  const std::size_t cap = chunk_capacity(max_packet);
  const std::size_t extra = first_frame_extra(name_size);
  if (extra >= cap) throw Error(Errc::invalid_name, "object name too long for the negotiated packet size");
  return std::max<std::size_t>(1, (payload_size + extra + cap - 1) / cap);
}

std::vector<ObexFrame> build_put_sequence(std::string_view name, std::span<const std::uint8_t> payload,
                                          std::uint16_t max_packet) {
  if (name.empty()) throw Error(Errc::invalid_name, "PUT requires a non-empty name");
  check_name(name);
  if (payload.size() > 0xFFFFFFFFu) throw Error(Errc::invalid_argument, "payload exceeds the 32-bit Length header");
  const std::size_t count = put_frame_count(payload.size(), name.size(), max_packet);
  const std::size_t cap = chunk_capacity(max_packet);

  std::vector<ObexFrame> frames;
  frames.reserve(count);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const bool first = i == 0;
    const bool last = i + 1 == count;
    ObexFrame frame{last ? Opcode::put_final : Opcode::put, std::nullopt, {}};
    std::size_t room = cap;
    if (first) {
      frame.headers.emplace_back(NameHeader{std::string(name)});
      frame.headers.emplace_back(LengthHeader{static_cast<std::uint32_t>(payload.size())});
      room -= first_frame_extra(name.size());
    }
    const std::size_t take = std::min(room, payload.size() - offset);
    Bytes chunk(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                payload.begin() + static_cast<std::ptrdiff_t>(offset + take));
    offset += take;
    if (last) {
      frame.headers.emplace_back(EndOfBodyHeader{std::move(chunk)});
    } else {
      frame.headers.emplace_back(BodyHeader{std::move(chunk)});
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

ObexFrame serve_push(simnet::RadioDevice& device, const ObexFrame& frame) {
  if (!device.powered) throw Error(Errc::powered_off, "device " + device.mac.str() + " is powered off");

  switch (frame.opcode) {
    case Opcode::connect: {
      reset_inbound(device);
      ObexFrame reply = response(Opcode::success);
      reply.connect = ConnectFields{0x10, 0x00, device.max_packet};
      return reply;
    }
    case Opcode::disconnect:
      reset_inbound(device);
      return response(Opcode::success);
    case Opcode::put:
    case Opcode::put_final:
      break;
    default:
      return response(Opcode::bad_request);
  }

  if (device.refuse_push) {
    reset_inbound(device);
    return response(Opcode::forbidden);
  }

  auto bad = [&device] {
    reset_inbound(device);
    return response(Opcode::bad_request);
  };

  auto& in = device.inbound;
  const bool final_frame = frame.opcode == Opcode::put_final;
  const bool starting = !in.active;
  bool saw_end = false;
  for (const auto& header : frame.headers) {
    if (const auto* n = std::get_if<NameHeader>(&header)) {
      if (in.active && !starting) return bad();
      if (n->value.empty() || !in.name.empty()) return bad();
      in.active = true;
      in.name = n->value;
    } else if (const auto* l = std::get_if<LengthHeader>(&header)) {
      if (!starting || in.declared_length) return bad();
      in.declared_length = l->value;
    } else if (const auto* b = std::get_if<BodyHeader>(&header)) {
      if (!in.active || saw_end) return bad();
      in.buffer.insert(in.buffer.end(), b->value.begin(), b->value.end());
    } else if (const auto* e = std::get_if<EndOfBodyHeader>(&header)) {
      if (!in.active || !final_frame || saw_end) return bad();
      in.buffer.insert(in.buffer.end(), e->value.begin(), e->value.end());
      saw_end = true;
    }
  }
  if (!in.active) return bad();
  if (!final_frame) return response(Opcode::continue_);
  if (!saw_end) return bad();
  if (in.declared_length && *in.declared_length != in.buffer.size()) return bad();

  device.inbox[in.name] = std::move(in.buffer);
  reset_inbound(device);
  return response(Opcode::success);
}

std::string_view to_string(SessionState s) noexcept {
  switch (s) {
    case SessionState::idle: return "idle";
    case SessionState::connected: return "connected";
    case SessionState::transferring: return "transferring";
    case SessionState::done: return "done";
    case SessionState::failed: return "failed";
  }
  return "unknown";
}

std::string_view to_string(TransferStatus s) noexcept {
  switch (s) {
    case TransferStatus::delivered: return "delivered";
    case TransferStatus::link_lost: return "link-lost";
    case TransferStatus::refused: return "refused";
    case TransferStatus::bad_request: return "bad-request";
  }
  return "unknown";
}

PushSession::PushSession(simnet::SimWorld& world, simnet::LinkHandle link, std::uint16_t max_packet)
    : world_(&world), link_(std::move(link)), max_packet_(max_packet) {
  if (max_packet < kMinMaxPacket) {
    throw Error(Errc::invalid_argument, "max packet must be at least " + std::to_string(kMinMaxPacket));
  }
}

ObexFrame PushSession::exchange(const ObexFrame& request, DecodeMode response_mode) {
  // Both directions go through the codec so every exchange is a wire round trip.
  const Bytes out = encode_frame(request);
  const auto at_server = decode_frame(out);
  auto& server = world_->device(link_.slave);
  const Bytes back = encode_frame(serve_push(server, at_server.frame));
  return decode_frame(back, response_mode).frame;
}

void PushSession::connect() {
  if (state_ != SessionState::idle) {
    throw Error(Errc::invalid_state, "connect requires an idle session, state is " + std::string(to_string(state_)));
  }
  if (!world_->link_open(link_)) throw Error(Errc::not_linked, "link to " + link_.slave.str() + " is not open");
  ObexFrame request{Opcode::connect, ConnectFields{0x10, 0x00, max_packet_}, {}};
  const ObexFrame reply = exchange(request, DecodeMode::connect_response);
  if (reply.opcode != Opcode::success || !reply.connect) {
    state_ = SessionState::failed;
    throw Error(Errc::invalid_state, "server rejected CONNECT");
  }
  max_packet_ = std::min(max_packet_, reply.connect->max_packet);
  if (max_packet_ < kMinMaxPacket) {
    state_ = SessionState::failed;
    throw Error(Errc::invalid_argument, "server max packet below " + std::to_string(kMinMaxPacket));
  }
  state_ = SessionState::connected;
}

TransferOutcome PushSession::fail(TransferOutcome outcome, TransferStatus status, std::string_view reason) {
  if (world_->find_device(link_.slave) != nullptr) world_->device(link_.slave).inbound = simnet::InboundPut{};
  state_ = SessionState::failed;
  outcome.status = status;
  outcome.finished = world_->now();
  world_->emit("push_failed", {{"frames", std::to_string(outcome.frames_sent)},
                               {"mac", link_.slave.str()},
                               {"reason", std::string(reason)}});
  return outcome;
}

TransferOutcome PushSession::push_file(std::string_view name, std::span<const std::uint8_t> payload) {
  if (state_ != SessionState::connected) {
    throw Error(Errc::invalid_state, "push requires a connected session, state is " + std::string(to_string(state_)));
  }
  const auto frames = build_put_sequence(name, payload, max_packet_);
  state_ = SessionState::transferring;

  const auto& params = world_->params();
  TransferOutcome outcome;
  outcome.frames_total = frames.size();
  outcome.payload_bytes = payload.size();
  outcome.started = world_->now();
  for (const auto& f : frames) outcome.wire_bytes += encoded_size(f);

  world_->emit("push_started", {{"bytes", std::to_string(payload.size())},
                                {"frames", std::to_string(frames.size())},
                                {"mac", link_.slave.str()},
                                {"name", std::string(name)}});

  std::optional<std::size_t> random_loss_at;
  if (params.loss_probability > 0.0 && world_->draw_unit() < params.loss_probability) {
    random_loss_at = frames.size() - 1;
  }

  const auto& loss_windows = world_->device(link_.slave).link_loss;
  std::uint64_t cumulative = 0;
  SimTime prev = outcome.started;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    cumulative += encoded_size(frames[i]);
    const SimTime at = outcome.started + simnet::transfer_duration(cumulative, params);
    world_->advance(at);
    if (!world_->link_open(link_)) return fail(outcome, TransferStatus::link_lost, "link-closed");
    const bool scripted = std::any_of(loss_windows.begin(), loss_windows.end(),
                                      [&](const simnet::LossWindow& w) { return w.from <= at && w.to > prev; });
    if (scripted || random_loss_at == i) return fail(outcome, TransferStatus::link_lost, "link-lost");
    prev = at;

    const ObexFrame reply = exchange(frames[i]);
    ++outcome.frames_sent;
    const bool last = i + 1 == frames.size();
    if (reply.opcode == Opcode::forbidden) return fail(outcome, TransferStatus::refused, "forbidden");
    if (reply.opcode != (last ? Opcode::success : Opcode::continue_)) {
      return fail(outcome, TransferStatus::bad_request, "bad-request");
    }
  }
  state_ = SessionState::done;
  outcome.finished = world_->now();
  world_->emit("push_completed", {{"duration_ms", std::to_string(outcome.duration().count())},
                                  {"frames", std::to_string(outcome.frames_sent)},
                                  {"mac", link_.slave.str()},
                                  {"name", std::string(name)},
                                  {"wire_bytes", std::to_string(outcome.wire_bytes)}});
  return outcome;
}

void PushSession::disconnect() {
  if (state_ == SessionState::transferring) throw Error(Errc::invalid_state, "cannot disconnect mid-transfer");
  if (world_->link_open(link_)) {
    if (state_ == SessionState::connected || state_ == SessionState::done) {
      exchange(ObexFrame{Opcode::disconnect, std::nullopt, {}});
    }
    simnet::disconnect(*world_, link_);
  }
  if (state_ == SessionState::connected) state_ = SessionState::done;
}

}  // namespace pidsim::obex
