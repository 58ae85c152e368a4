#include "nebula/gf256.hpp"

namespace nebula::gf256 {

void mul_add_row(uint8_t* dst, const uint8_t* src, uint8_t c, size_t n) {
  if (c == 0 || n == 0) return;
  if (c == 1) {
    for (size_t i = 0; i < n; ++i) dst[i] ^= src[i];
    return;
  }
  uint8_t row[256];
  row[0] = 0;
  for (int v = 1; v < 256; ++v) row[v] = mul(c, static_cast<uint8_t>(v));
  for (size_t i = 0; i < n; ++i) dst[i] ^= row[src[i]];
}

void scale_row(uint8_t* dst, uint8_t c, size_t n) {
  if (c == 1 || n == 0) return;
  uint8_t row[256];
  row[0] = 0;
  for (int v = 1; v < 256; ++v) row[v] = mul(c, static_cast<uint8_t>(v));
  for (size_t i = 0; i < n; ++i) dst[i] = row[dst[i]];
}

}  // namespace nebula::gf256
