#include "nebula/rlnc.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <string>

#include "nebula/gf256.hpp"
#include "nebula/rng.hpp"

namespace nebula::rlnc {

void FecBlockSpec::validate() const {
  if (k < 1) throw std::invalid_argument("FecBlockSpec: k must be >= 1");
  if (n < k) throw std::invalid_argument("FecBlockSpec: n must be >= k");
  if (symbol_size < 1) throw std::invalid_argument("FecBlockSpec: symbol_size must be >= 1");
  if (n - k > 255)
    throw std::invalid_argument("FecBlockSpec: n - k must fit one GF(2^8) generation (<= 255)");
}

std::vector<CodedPacket> encode_block(std::span<const uint8_t> frame_bytes,
                                      const FecBlockSpec& spec, uint64_t seed) {
  spec.validate();
  const size_t block_bytes = static_cast<size_t>(spec.k) * spec.symbol_size;
  if (frame_bytes.size() > block_bytes)
    throw std::length_error("encode_block: frame of " + std::to_string(frame_bytes.size()) +
                            " bytes exceeds k*symbol_size = " + std::to_string(block_bytes));

  std::vector<uint8_t> padded(block_bytes, 0);
  std::memcpy(padded.data(), frame_bytes.data(), frame_bytes.size());

  std::vector<CodedPacket> out;
  out.reserve(spec.n);
  for (uint16_t i = 0; i < spec.k; ++i) {
    CodedPacket p;
    p.block_id = spec.block_id;
    p.index = i;
    p.kind = PacketKind::systematic;
    p.payload.assign(padded.begin() + static_cast<ptrdiff_t>(i) * spec.symbol_size,
                     padded.begin() + static_cast<ptrdiff_t>(i + 1) * spec.symbol_size);
    out.push_back(std::move(p));
  }

  rng::Engine eng(seed);
  for (uint16_t i = spec.k; i < spec.n; ++i) {
    CodedPacket p;
    p.block_id = spec.block_id;
    p.index = i;
    p.kind = PacketKind::coded;
    p.coefficients.resize(spec.k);
    do {
      for (auto& c : p.coefficients) c = rng::uniform_byte(eng);
    } while (std::all_of(p.coefficients.begin(), p.coefficients.end(),
                         [](uint8_t c) { return c == 0; }));
    p.payload.assign(spec.symbol_size, 0);
    for (uint16_t s = 0; s < spec.k; ++s)
      gf256::mul_add_row(p.payload.data(),
                         padded.data() + static_cast<size_t>(s) * spec.symbol_size,
                         p.coefficients[s], spec.symbol_size);
    out.push_back(std::move(p));
  }
  return out;
}

Decoder::Decoder(FecBlockSpec spec) : spec_(spec) {
  spec_.validate();
  pivots_.resize(spec_.k);
}

bool Decoder::absorb(const CodedPacket& pkt) {
  if (pkt.block_id != spec_.block_id)
    throw std::invalid_argument("Decoder::absorb: block id mismatch");
  if (pkt.payload.size() != spec_.symbol_size)
    throw std::invalid_argument("Decoder::absorb: payload size mismatch");

  Row row;
  row.payload = pkt.payload;
  if (pkt.kind == PacketKind::systematic) {
    if (pkt.index >= spec_.k)
      throw std::invalid_argument("Decoder::absorb: systematic index out of range");
    row.coeffs.assign(spec_.k, 0);
    row.coeffs[pkt.index] = 1;
  } else {
    if (pkt.coefficients.size() != spec_.k)
      throw std::invalid_argument("Decoder::absorb: coefficient vector length mismatch");
    row.coeffs = pkt.coefficients;
  }

  // Forward-reduce against existing pivots.
  for (uint16_t c = 0; c < spec_.k; ++c) {
    const uint8_t v = row.coeffs[c];
    if (v == 0 || !pivots_[c]) continue;
    gf256::mul_add_row(row.coeffs.data(), pivots_[c]->coeffs.data(), v, spec_.k);
    gf256::mul_add_row(row.payload.data(), pivots_[c]->payload.data(), v, spec_.symbol_size);
  }

  uint16_t pivot = spec_.k;
  for (uint16_t c = 0; c < spec_.k; ++c) {
    if (row.coeffs[c] != 0) {
      pivot = c;
      break;
    }
  }
  if (pivot == spec_.k) return false;  // duplicate or dependent

  const uint8_t lead_inv = gf256::inv(row.coeffs[pivot]);
  gf256::scale_row(row.coeffs.data(), lead_inv, spec_.k);
  gf256::scale_row(row.payload.data(), lead_inv, spec_.symbol_size);

  // Back-eliminate the new pivot column from already stored rows so the
  // matrix stays in reduced form and recover() is a straight copy.
  for (uint16_t c = 0; c < spec_.k; ++c) {
    if (!pivots_[c]) continue;
    const uint8_t v = pivots_[c]->coeffs[pivot];
    if (v == 0) continue;
    gf256::mul_add_row(pivots_[c]->coeffs.data(), row.coeffs.data(), v, spec_.k);
    gf256::mul_add_row(pivots_[c]->payload.data(), row.payload.data(), v, spec_.symbol_size);
  }

  pivots_[pivot] = std::move(row);
  ++rank_;
  return true;
}

std::vector<uint8_t> Decoder::recover() const {
  if (rank_ != spec_.k)
    throw std::runtime_error("Decoder::recover: insufficient rank " + std::to_string(rank_) +
                             " of k = " + std::to_string(spec_.k));
  std::vector<uint8_t> out(static_cast<size_t>(spec_.k) * spec_.symbol_size);
  for (uint16_t c = 0; c < spec_.k; ++c)
    std::memcpy(out.data() + static_cast<size_t>(c) * spec_.symbol_size,
                pivots_[c]->payload.data(), spec_.symbol_size);
  return out;
}

}  // namespace nebula::rlnc
