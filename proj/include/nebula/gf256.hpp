#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>

// GF(2^8) arithmetic over the reduction polynomial x^8+x^4+x^3+x^2+1 (0x11d),
// the usual RLNC / Reed-Solomon field. log/exp tables are built at compile
// time; 0x02 is primitive for this polynomial.

namespace nebula::gf256 {

inline constexpr uint16_t reduction_poly = 0x11d;

namespace detail {

struct Tables {
  std::array<uint8_t, 512> exp{};
  std::array<uint8_t, 256> log{};
};

constexpr Tables build_tables() {
  Tables t{};
  uint16_t x = 1;
  for (int i = 0; i < 255; ++i) {
    t.exp[static_cast<size_t>(i)] = static_cast<uint8_t>(x);
    t.log[x] = static_cast<uint8_t>(i);
    x = static_cast<uint16_t>(x << 1);
    if (x & 0x100) x = static_cast<uint16_t>(x ^ reduction_poly);
  }
  // Duplicate so exp[log a + log b] needs no modular reduction.
  for (int i = 255; i < 510; ++i)
    t.exp[static_cast<size_t>(i)] = t.exp[static_cast<size_t>(i - 255)];
  return t;
}

inline constexpr Tables tables = build_tables();

}  // namespace detail

constexpr uint8_t add(uint8_t a, uint8_t b) noexcept { return a ^ b; }

constexpr uint8_t mul(uint8_t a, uint8_t b) noexcept {
  if (a == 0 || b == 0) return 0;
  return detail::tables.exp[static_cast<size_t>(detail::tables.log[a]) +
                            static_cast<size_t>(detail::tables.log[b])];
}

inline uint8_t inv(uint8_t a) {
  if (a == 0) throw std::domain_error("gf256: inverse of zero");
  return detail::tables.exp[static_cast<size_t>(255 - detail::tables.log[a])];
}

inline uint8_t div(uint8_t a, uint8_t b) {
  if (b == 0) throw std::domain_error("gf256: division by zero");
  if (a == 0) return 0;
  int d = static_cast<int>(detail::tables.log[a]) - static_cast<int>(detail::tables.log[b]);
  if (d < 0) d += 255;
  return detail::tables.exp[static_cast<size_t>(d)];
}

// dst[i] ^= c * src[i]. Hot path of the decoder; builds the 256-entry
// product row for c once instead of log/exp per byte.
void mul_add_row(uint8_t* dst, const uint8_t* src, uint8_t c, size_t n);

// dst[i] *= c.
void scale_row(uint8_t* dst, uint8_t c, size_t n);

}  // namespace nebula::gf256
