#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "nebula/rng.hpp"
#include "nebula/wire.hpp"

#include <vector>

using namespace nebula;
using namespace nebula::wire;

namespace {

WirePacket random_packet(rng::Engine& e) {
  switch (rng::uniform_below(e, 4)) {
    case 0: {
      FrtpPacket p;
      p.frame_id = static_cast<uint32_t>(e());
      p.gop_index = rng::uniform_byte(e);
      p.k = static_cast<uint16_t>(1 + rng::uniform_below(e, 40));
      p.n = static_cast<uint16_t>(p.k + rng::uniform_below(e, 20));
      p.packet_index = static_cast<uint16_t>(rng::uniform_below(e, p.n));
      p.event_seq = static_cast<uint32_t>(e());
      p.send_timestamp_us = e();
      p.level = static_cast<uint8_t>(rng::uniform_below(e, 9));
      const size_t payload_len = 1 + rng::uniform_below(e, 64);
      p.payload.resize(payload_len);
      for (auto& b : p.payload) b = rng::uniform_byte(e);
      p.frame_len = static_cast<uint32_t>(rng::uniform_below(e, p.k * payload_len + 1));
      if (p.packet_index >= p.k) {
        p.coefficients.resize(p.k);
        for (auto& c : p.coefficients) c = rng::uniform_byte(e);
      }
      return p;
    }
    case 1: {
      NprPacket p;
      p.report_seq = static_cast<uint32_t>(e());
      p.mu_q16 = static_cast<uint32_t>(e());
      p.pi_q32 = static_cast<uint32_t>(e());
      p.rtt_us = static_cast<uint32_t>(e());
      p.mtp_us = static_cast<uint32_t>(e());
      p.client_timestamp_us = e();
      return p;
    }
    case 2:
      return RttpPacket{static_cast<uint32_t>(e()), e(), rng::uniform_below(e, 2) == 1};
    default:
      return EventPacket{static_cast<uint32_t>(e()), static_cast<uint16_t>(e()), e()};
  }
}

}  // namespace

TEST_CASE("golden fixture: RTTP request probe_seq=1 ts=0 is the frozen 17 bytes") {
  const std::vector<uint8_t> expected = {0x4e, 0x01, 0x03, 0x00, 0x0c, 0x00, 0x00, 0x00, 0x01,
                                         0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00};
  CHECK(encode_packet(RttpPacket{1, 0, false}) == expected);
}

TEST_CASE("golden fixture: RTTP reply carries the subtype flag") {
  const std::vector<uint8_t> expected = {0x4e, 0x01, 0x83, 0x00, 0x0c, 0x00, 0x00, 0x00, 0x07,
                                         0x00, 0x00, 0x00, 0x00, 0x00, 0x12, 0xd6, 0x87};
  CHECK(encode_packet(RttpPacket{7, 1234567, true}) == expected);
}

TEST_CASE("golden fixture: Event") {
  const std::vector<uint8_t> expected = {0x4e, 0x01, 0x04, 0x00, 0x0e, 0x00, 0x00, 0x01, 0x02,
                                         0x00, 0x07, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1e, 0x84,
                                         0x80};
  CHECK(encode_packet(EventPacket{258, 7, 2000000}) == expected);
}

TEST_CASE("golden fixture: NPR with fixed-point rates") {
  NprPacket p;
  p.report_seq = 3;
  p.set_mu_mbps(2.5);
  p.set_pi(0.25);
  p.rtt_us = 20000;
  p.mtp_us = 138600;
  p.client_timestamp_us = 5000000;
  CHECK(p.mu_q16 == 163840);      // 2.5 * 2^16
  CHECK(p.pi_q32 == 1073741824);  // round(0.25 * (2^32-1))
  const std::vector<uint8_t> expected = {
      0x4e, 0x01, 0x02, 0x00, 0x1c, 0x00, 0x00, 0x00, 0x03, 0x00, 0x02,
      0x80, 0x00, 0x40, 0x00, 0x00, 0x00, 0x00, 0x00, 0x4e, 0x20, 0x00,
      0x02, 0x1d, 0x68, 0x00, 0x00, 0x00, 0x00, 0x00, 0x4c, 0x4b, 0x40};
  CHECK(encode_packet(p) == expected);
  CHECK(p.pi() == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(p.mu_mbps() == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("golden fixture: coded FRTP") {
  FrtpPacket f;
  f.frame_id = 9;
  f.gop_index = 2;
  f.k = 2;
  f.n = 3;
  f.packet_index = 2;
  f.frame_len = 5;
  f.event_seq = 4;
  f.send_timestamp_us = 1000;
  f.level = 8;
  f.coefficients = {0x11, 0x2d};
  f.payload = {0xaa, 0xbb, 0xcc};
  const std::vector<uint8_t> expected = {
      0x4e, 0x01, 0x01, 0x00, 0x21, 0x00, 0x00, 0x00, 0x09, 0x02, 0x00, 0x02, 0x00,
      0x03, 0x00, 0x02, 0x00, 0x00, 0x00, 0x05, 0x00, 0x00, 0x00, 0x04, 0x00, 0x00,
      0x00, 0x00, 0x00, 0x00, 0x03, 0xe8, 0x08, 0x11, 0x2d, 0xaa, 0xbb, 0xcc};
  CHECK(encode_packet(f) == expected);
}

TEST_CASE("FRTP fixed header stays within the datagram budget") {
  // 5-byte common header + 28 fixed body bytes; payloads of S <= 1466 fit
  // 1500-byte datagrams for systematic packets.
  FrtpPacket f;
  f.k = 1;
  f.n = 1;
  f.packet_index = 0;
  f.payload.assign(1466, 0);
  f.frame_len = 1466;
  CHECK(encode_packet(f).size() - f.payload.size() <= 34);
  CHECK(encode_packet(f).size() <= 1500);
}

TEST_CASE("roundtrip identity over 10,000 random packets") {
  rng::Engine e(20240601);
  for (int i = 0; i < 10000; ++i) {
    const WirePacket p = random_packet(e);
    const auto bytes = encode_packet(p);
    const auto back = decode_packet(bytes);
    REQUIRE(std::holds_alternative<WirePacket>(back));
    CHECK(std::get<WirePacket>(back) == p);
  }
}

TEST_CASE("header guards") {
  auto bytes = encode_packet(RttpPacket{1, 2, false});

  auto bad_magic = bytes;
  bad_magic[0] ^= 0xff;
  CHECK(std::get<DecodeError>(decode_packet(bad_magic)) == DecodeError::bad_magic);

  auto bad_version = bytes;
  bad_version[1] = 0x7f;
  CHECK(std::get<DecodeError>(decode_packet(bad_version)) == DecodeError::bad_version);

  auto bad_type = bytes;
  bad_type[2] = 0x09;
  CHECK(std::get<DecodeError>(decode_packet(bad_type)) == DecodeError::bad_type);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK(std::get<DecodeError>(decode_packet(truncated)) == DecodeError::truncated);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK(std::get<DecodeError>(decode_packet(trailing)) == DecodeError::bad_length);

  CHECK(std::get<DecodeError>(decode_packet(std::vector<uint8_t>{})) == DecodeError::truncated);
}

TEST_CASE("field validation: FRTP") {
  FrtpPacket f;
  f.k = 2;
  f.n = 4;
  f.packet_index = 1;
  f.payload = {1, 2, 3};
  f.frame_len = 6;
  auto bytes = encode_packet(f);

  // packet_index >= n
  auto bad_index = bytes;
  bad_index[5 + 10] = 0;
  bad_index[5 + 11] = 9;
  CHECK(std::get<DecodeError>(decode_packet(bad_index)) == DecodeError::bad_field);

  // frame_len > k * payload size
  auto bad_len = bytes;
  bad_len[5 + 12] = 0xff;
  CHECK(std::get<DecodeError>(decode_packet(bad_len)) == DecodeError::bad_field);
}

TEST_CASE("encode rejects malformed packets") {
  FrtpPacket f;
  f.k = 2;
  f.n = 3;
  f.packet_index = 2;  // coded: needs exactly k coefficients
  f.payload = {1};
  CHECK_THROWS_AS(encode_packet(f), std::invalid_argument);

  f.coefficients = {1, 2};
  f.payload.assign(70000, 0);  // body would overflow the u16 length
  CHECK_THROWS_AS(encode_packet(f), std::length_error);
}

TEST_CASE("fuzz: arbitrary bytes always yield a packet or a structured error") {
  rng::Engine e(777);
  int decoded = 0, errored = 0;
  for (int i = 0; i < 50000; ++i) {
    std::vector<uint8_t> noise(rng::uniform_below(e, 80));
    for (auto& b : noise) b = rng::uniform_byte(e);
    // Half the time, make the header plausible so field parsing is reached.
    if (!noise.empty() && rng::uniform_below(e, 2) == 0) {
      noise[0] = k_magic;
      if (noise.size() > 1) noise[1] = k_version;
      if (noise.size() > 4) {
        noise[2] = static_cast<uint8_t>(1 + rng::uniform_below(e, 4));
        const size_t body = noise.size() - k_header_bytes;
        noise[3] = static_cast<uint8_t>(body >> 8);
        noise[4] = static_cast<uint8_t>(body);
      }
    }
    const auto res = decode_packet(noise);
    if (std::holds_alternative<WirePacket>(res)) {
      ++decoded;
      // Coincidentally valid bytes must re-encode without throwing.
      CHECK_NOTHROW(encode_packet(std::get<WirePacket>(res)));
    } else {
      ++errored;
    }
  }
  CHECK(decoded + errored == 50000);
  CHECK(errored > 0);
}

TEST_CASE("decode error strings") {
  CHECK(std::string(to_string(DecodeError::bad_magic)) == "bad magic");
  CHECK(std::string(to_string(DecodeError::truncated)) == "truncated");
}
