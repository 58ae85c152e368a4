#include "nebula/wire.hpp"

#include <cstring>
#include <stdexcept>

namespace nebula::wire {

namespace {

class Writer {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) {
    buf_.push_back(static_cast<uint8_t>(v >> 8));
    buf_.push_back(static_cast<uint8_t>(v));
  }
  void u32(uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) buf_.push_back(static_cast<uint8_t>(v >> s));
  }
  void u64(uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) buf_.push_back(static_cast<uint8_t>(v >> s));
  }
  void bytes(const std::vector<uint8_t>& v) { buf_.insert(buf_.end(), v.begin(), v.end()); }
  std::vector<uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> b) : b_(b) {}
  bool u8(uint8_t& v) { return take(1) && (v = b_[pos_ - 1], true); }
  bool u16(uint16_t& v) {
    if (!take(2)) return false;
    v = static_cast<uint16_t>((b_[pos_ - 2] << 8) | b_[pos_ - 1]);
    return true;
  }
  bool u32(uint32_t& v) {
    if (!take(4)) return false;
    v = 0;
    for (size_t i = pos_ - 4; i < pos_; ++i) v = (v << 8) | b_[i];
    return true;
  }
  bool u64(uint64_t& v) {
    if (!take(8)) return false;
    v = 0;
    for (size_t i = pos_ - 8; i < pos_; ++i) v = (v << 8) | b_[i];
    return true;
  }
  bool bytes(std::vector<uint8_t>& out, size_t count) {
    if (!take(count)) return false;
    out.assign(b_.begin() + static_cast<ptrdiff_t>(pos_ - count),
               b_.begin() + static_cast<ptrdiff_t>(pos_));
    return true;
  }
  size_t remaining() const { return b_.size() - pos_; }

 private:
  bool take(size_t count) {
    if (b_.size() - pos_ < count) return false;
    pos_ += count;
    return true;
  }
  std::span<const uint8_t> b_;
  size_t pos_ = 0;
};

void encode_body(Writer& w, const FrtpPacket& p) {
  w.u32(p.frame_id);
  w.u8(p.gop_index);
  w.u16(p.k);
  w.u16(p.n);
  w.u16(p.packet_index);
  w.u32(p.frame_len);
  w.u32(p.event_seq);
  w.u64(p.send_timestamp_us);
  w.u8(p.level);
  if (p.packet_index >= p.k) {
    if (p.coefficients.size() != p.k)
      throw std::invalid_argument("encode_packet: coded FRTP needs exactly k coefficients");
    w.bytes(p.coefficients);
  } else if (!p.coefficients.empty()) {
    throw std::invalid_argument("encode_packet: systematic FRTP carries no coefficients");
  }
  w.bytes(p.payload);
}

void encode_body(Writer& w, const NprPacket& p) {
  w.u32(p.report_seq);
  w.u32(p.mu_q16);
  w.u32(p.pi_q32);
  w.u32(p.rtt_us);
  w.u32(p.mtp_us);
  w.u64(p.client_timestamp_us);
}

void encode_body(Writer& w, const RttpPacket& p) {
  w.u32(p.probe_seq);
  w.u64(p.origin_timestamp_us);
}

void encode_body(Writer& w, const EventPacket& p) {
  w.u32(p.event_seq);
  w.u16(p.event_id);
  w.u64(p.client_timestamp_us);
}

DecodeResult decode_frtp(Reader& r) {
  FrtpPacket p;
  if (!r.u32(p.frame_id) || !r.u8(p.gop_index) || !r.u16(p.k) || !r.u16(p.n) ||
      !r.u16(p.packet_index) || !r.u32(p.frame_len) || !r.u32(p.event_seq) ||
      !r.u64(p.send_timestamp_us) || !r.u8(p.level))
    return DecodeError::truncated;
  if (p.k < 1 || p.n < p.k || p.packet_index >= p.n) return DecodeError::bad_field;
  if (p.packet_index >= p.k && !r.bytes(p.coefficients, p.k)) return DecodeError::truncated;
  if (!r.bytes(p.payload, r.remaining())) return DecodeError::truncated;
  if (p.frame_len > static_cast<uint64_t>(p.k) * p.payload.size()) return DecodeError::bad_field;
  return WirePacket{std::move(p)};
}

DecodeResult decode_npr(Reader& r) {
  NprPacket p;
  if (!r.u32(p.report_seq) || !r.u32(p.mu_q16) || !r.u32(p.pi_q32) || !r.u32(p.rtt_us) ||
      !r.u32(p.mtp_us) || !r.u64(p.client_timestamp_us))
    return DecodeError::truncated;
  if (r.remaining() != 0) return DecodeError::bad_length;
  return WirePacket{p};
}

DecodeResult decode_rttp(Reader& r, bool reply) {
  RttpPacket p;
  p.reply = reply;
  if (!r.u32(p.probe_seq) || !r.u64(p.origin_timestamp_us)) return DecodeError::truncated;
  if (r.remaining() != 0) return DecodeError::bad_length;
  return WirePacket{p};
}

DecodeResult decode_event(Reader& r) {
  EventPacket p;
  if (!r.u32(p.event_seq) || !r.u16(p.event_id) || !r.u64(p.client_timestamp_us))
    return DecodeError::truncated;
  if (r.remaining() != 0) return DecodeError::bad_length;
  return WirePacket{p};
}

}  // namespace

const char* to_string(DecodeError e) {
  switch (e) {
    case DecodeError::bad_magic: return "bad magic";
    case DecodeError::bad_version: return "bad version";
    case DecodeError::bad_type: return "bad type";
    case DecodeError::truncated: return "truncated";
    case DecodeError::bad_length: return "bad length";
    case DecodeError::bad_field: return "bad field";
  }
  return "unknown";
}

std::vector<uint8_t> encode_packet(const WirePacket& p) {
  Writer body;
  uint8_t type = 0;
  std::visit(
      [&](const auto& pkt) {
        using T = std::decay_t<decltype(pkt)>;
        if constexpr (std::is_same_v<T, FrtpPacket>) {
          type = static_cast<uint8_t>(PacketType::frtp);
        } else if constexpr (std::is_same_v<T, NprPacket>) {
          type = static_cast<uint8_t>(PacketType::npr);
        } else if constexpr (std::is_same_v<T, RttpPacket>) {
          type = static_cast<uint8_t>(PacketType::rttp);
          if (pkt.reply) type |= k_subtype_flag;
        } else {
          type = static_cast<uint8_t>(PacketType::event);
        }
        encode_body(body, pkt);
      },
      p);

  auto payload = body.take();
  if (payload.size() > 0xffff)
    throw std::length_error("encode_packet: body exceeds 16-bit length field");

  Writer out;
  out.u8(k_magic);
  out.u8(k_version);
  out.u8(type);
  out.u16(static_cast<uint16_t>(payload.size()));
  out.bytes(payload);
  return out.take();
}

DecodeResult decode_packet(std::span<const uint8_t> bytes) {
  Reader header(bytes);
  uint8_t magic = 0, version = 0, type = 0;
  uint16_t length = 0;
  if (!header.u8(magic) || !header.u8(version) || !header.u8(type) || !header.u16(length))
    return DecodeError::truncated;
  if (magic != k_magic) return DecodeError::bad_magic;
  if (version != k_version) return DecodeError::bad_version;
  if (header.remaining() < length) return DecodeError::truncated;
  if (header.remaining() > length) return DecodeError::bad_length;

  Reader r(bytes.subspan(k_header_bytes, length));
  const bool flagged = (type & k_subtype_flag) != 0;
  switch (static_cast<PacketType>(type & 0x7f)) {
    case PacketType::frtp:
      return flagged ? DecodeResult{DecodeError::bad_type} : decode_frtp(r);
    case PacketType::npr:
      return flagged ? DecodeResult{DecodeError::bad_type} : decode_npr(r);
    case PacketType::rttp:
      return decode_rttp(r, flagged);
    case PacketType::event:
      return flagged ? DecodeResult{DecodeError::bad_type} : decode_event(r);
    default:
      return DecodeError::bad_type;
  }
}

}  // namespace nebula::wire
