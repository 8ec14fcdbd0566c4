#pragma once

// 104-bit header layout and effective-bit index extraction.
//
// Layout: SrcIP bits 0-31, DstIP 32-63, SrcPort 64-79, DstPort 80-95,
// Proto 96-103. Inside each field, offset 0 is the field's MSB.

#include <array>
#include <bitset>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ruleset.hpp"

namespace mbtc {

inline constexpr int kHeaderBits = 104;
inline constexpr std::size_t kMaxIndexBits = 24;
inline constexpr std::array<int, kNumFields> kFieldOffset{0, 32, 64, 80, 96};

using BitPos = int;
using Bit104 = std::bitset<kHeaderBits>;

inline bool valid_bit_pos(BitPos p) noexcept { return p >= 0 && p < kHeaderBits; }

inline std::size_t field_of_bit(BitPos p) noexcept {
  std::size_t d = kNumFields - 1;
  while (d > 0 && p < kFieldOffset[d]) --d;
  return d;
}

// Bit at global position `pos` of the packed header.
inline unsigned header_bit(const PacketHeader& h, BitPos pos) noexcept {
  const std::size_t d = field_of_bit(pos);
  const unsigned shift = kFieldWidth[d] - 1 - static_cast<unsigned>(pos - kFieldOffset[d]);
  return static_cast<unsigned>((h.field(d) >> shift) & 1u);
}

inline Bit104 pack_header(const PacketHeader& h) {
  Bit104 bits;
  for (std::size_t d = 0; d < kNumFields; ++d) {
    const std::uint64_t v = h.field(d);
    const unsigned w = kFieldWidth[d];
    for (unsigned i = 0; i < w; ++i)
      if ((v >> (w - 1 - i)) & 1u) bits.set(kFieldOffset[d] + i);
  }
  return bits;
}

inline PacketHeader unpack_header(const Bit104& bits) {
  std::array<std::uint64_t, kNumFields> f{};
  for (std::size_t d = 0; d < kNumFields; ++d) {
    const unsigned w = kFieldWidth[d];
    for (unsigned i = 0; i < w; ++i) f[d] = (f[d] << 1) | (bits.test(kFieldOffset[d] + i) ? 1u : 0u);
  }
  return PacketHeader::from_fields(f);
}

// Throws unless positions are in range, distinct, and fit the table guard.
inline void validate_positions(std::span<const BitPos> positions) {
  if (positions.size() > kMaxIndexBits)
    throw Error("index of " + std::to_string(positions.size()) + " bits exceeds the " +
                std::to_string(kMaxIndexBits) + "-bit table guard");
  Bit104 seen;
  for (BitPos p : positions) {
    if (!valid_bit_pos(p)) throw Error("bit position " + std::to_string(p) + " outside 0..103");
    if (seen.test(p)) throw Error("duplicate bit position " + std::to_string(p));
    seen.set(p);
  }
}

// No validation; callers hold positions validated at table build time.
inline std::uint32_t extract_index_unchecked(const PacketHeader& h, std::span<const BitPos> positions) noexcept {
  std::uint32_t idx = 0;
  for (BitPos p : positions) idx = (idx << 1) | header_bit(h, p);
  return idx;
}

// The first listed position becomes the most significant index bit.
inline std::uint32_t extract_index(const PacketHeader& h, std::span<const BitPos> positions) {
  validate_positions(positions);
  return extract_index_unchecked(h, positions);
}

inline std::uint32_t extract_index(const PacketHeader& h, std::initializer_list<BitPos> positions) {
  return extract_index(h, std::span<const BitPos>(positions.begin(), positions.size()));
}

}  // namespace mbtc
