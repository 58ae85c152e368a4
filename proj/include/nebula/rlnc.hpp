#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

// Systematic RLNC block codec. A block protects one frame (or one GoP in
// GoP-level mode): the payload is split into k symbols of symbol_size bytes,
// the first k output packets are the symbols themselves and the remaining
// n-k carry random GF(2^8) combinations. Any k linearly independent packets
// recover the block.

namespace nebula::rlnc {

struct FecBlockSpec {
  uint32_t block_id = 0;
  uint16_t k = 1;            // source packets
  uint16_t n = 1;            // total packets, n >= k
  uint16_t symbol_size = 1;  // payload bytes per packet

  // Throws std::invalid_argument on k < 1, n < k, symbol_size < 1 or
  // n - k > 255.
  void validate() const;

  friend bool operator==(const FecBlockSpec&, const FecBlockSpec&) = default;
};

enum class PacketKind : uint8_t { systematic, coded };

struct CodedPacket {
  uint32_t block_id = 0;
  uint16_t index = 0;  // 0..n-1; index < k means systematic
  PacketKind kind = PacketKind::systematic;
  std::vector<uint8_t> coefficients;  // length k for coded packets, else empty
  std::vector<uint8_t> payload;       // symbol_size bytes

  friend bool operator==(const CodedPacket&, const CodedPacket&) = default;
};

// Splits frame_bytes (zero-padded to k * symbol_size) into k symbols and
// produces n packets: k systematic followed by n-k coded ones whose
// coefficient vectors come from mt19937_64(seed), never all-zero.
// Deterministic for a given (frame, spec, seed).
// Throws std::length_error if the frame does not fit the spec.
std::vector<CodedPacket> encode_block(std::span<const uint8_t> frame_bytes,
                                      const FecBlockSpec& spec, uint64_t seed);

// Progressive Gaussian elimination. The coefficient matrix is kept in reduced
// row-echelon form across absorb() calls, so recovery after the k-th
// independent packet is a plain copy. Rank never decreases; duplicates and
// dependent packets are absorbed without effect.
class Decoder {
 public:
  explicit Decoder(FecBlockSpec spec);

  // Returns true iff the packet increased the rank.
  // Throws std::invalid_argument on block id mismatch or malformed
  // coefficient length.
  bool absorb(const CodedPacket& pkt);

  uint16_t rank() const { return rank_; }
  bool complete() const { return rank_ == spec_.k; }
  const FecBlockSpec& spec() const { return spec_; }

  // Returns the k * symbol_size recovered bytes (including padding; the
  // true length travels in the transport header).
  // Throws std::runtime_error when rank < k, reporting rank and k.
  std::vector<uint8_t> recover() const;

 private:
  struct Row {
    std::vector<uint8_t> coeffs;
    std::vector<uint8_t> payload;
  };

  FecBlockSpec spec_;
  uint16_t rank_ = 0;
  std::vector<std::optional<Row>> pivots_;  // indexed by pivot column
};

}  // namespace nebula::rlnc
