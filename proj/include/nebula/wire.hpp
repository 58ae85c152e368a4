#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

// Wire formats of the four packet types. Layouts are big-endian and
// documented byte-by-byte in PROTOCOL.md; golden fixtures live in the tests.
//
// Common header (5 bytes): magic 0x4e, version 0x01, type byte, u16 length
// of everything after the header. Bit 7 of the type byte is a subtype flag,
// used by RTTP to distinguish reply from request.

namespace nebula::wire {

inline constexpr uint8_t k_magic = 0x4e;
inline constexpr uint8_t k_version = 0x01;
inline constexpr size_t k_header_bytes = 5;

enum class PacketType : uint8_t { frtp = 0x01, npr = 0x02, rttp = 0x03, event = 0x04 };
inline constexpr uint8_t k_subtype_flag = 0x80;

// Media packet: one RLNC symbol plus the frame bookkeeping the client needs.
// packet_index < k means a systematic symbol (no coefficient vector on the
// wire); otherwise exactly k coefficient bytes precede the payload.
struct FrtpPacket {
  uint32_t frame_id = 0;
  uint8_t gop_index = 0;  // frame position within its GoP
  uint16_t k = 1;
  uint16_t n = 1;
  uint16_t packet_index = 0;
  uint32_t frame_len = 0;  // pre-padding byte count, <= k * payload size
  uint32_t event_seq = 0;  // echoed user event, 0 = none
  uint64_t send_timestamp_us = 0;
  uint8_t level = 0;
  std::vector<uint8_t> coefficients;  // size k iff packet_index >= k
  std::vector<uint8_t> payload;

  friend bool operator==(const FrtpPacket&, const FrtpPacket&) = default;
};

// Client feedback report. Rates travel as fixed point: mu in Q16.16 Mb/s,
// pi scaled to the full u32 range so that 1.0 encodes exactly.
struct NprPacket {
  uint32_t report_seq = 0;
  uint32_t mu_q16 = 0;
  uint32_t pi_q32 = 0;
  uint32_t rtt_us = 0;
  uint32_t mtp_us = 0;
  uint64_t client_timestamp_us = 0;

  double mu_mbps() const { return mu_q16 / 65536.0; }
  double pi() const { return pi_q32 / 4294967295.0; }
  void set_mu_mbps(double v) { mu_q16 = static_cast<uint32_t>(std::lround(v * 65536.0)); }
  void set_pi(double v) {
    if (v < 0) v = 0;
    if (v > 1) v = 1;
    pi_q32 = static_cast<uint32_t>(std::llround(v * 4294967295.0));
  }

  friend bool operator==(const NprPacket&, const NprPacket&) = default;
};

struct RttpPacket {
  uint32_t probe_seq = 0;
  uint64_t origin_timestamp_us = 0;
  bool reply = false;  // a reply carries the request's origin timestamp unmodified

  friend bool operator==(const RttpPacket&, const RttpPacket&) = default;
};

struct EventPacket {
  uint32_t event_seq = 0;  // strictly increasing per session
  uint16_t event_id = 0;
  uint64_t client_timestamp_us = 0;

  friend bool operator==(const EventPacket&, const EventPacket&) = default;
};

using WirePacket = std::variant<FrtpPacket, NprPacket, RttpPacket, EventPacket>;

enum class DecodeError : uint8_t {
  bad_magic,
  bad_version,
  bad_type,
  truncated,
  bad_length,
  bad_field,
};

const char* to_string(DecodeError e);

using DecodeResult = std::variant<WirePacket, DecodeError>;

// Deterministic big-endian serialization. Throws std::length_error when the
// encoded body would overflow the 16-bit length field.
std::vector<uint8_t> encode_packet(const WirePacket& p);

// Total inverse of encode_packet: any byte string yields either a packet or
// a structured error, never UB.
DecodeResult decode_packet(std::span<const uint8_t> bytes);

}  // namespace nebula::wire
