#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scalegraph {

inline constexpr unsigned kMaxIdBits = 256;

class Identifier;

/// Width of the address space shared by nodes and accounts.
class IdSpace {
public:
  explicit IdSpace(unsigned bits = 32);

  unsigned bits() const noexcept { return bits_; }
  unsigned hex_digits() const noexcept { return (bits_ + 3) / 4; }
  bool contains(const Identifier& id) const noexcept;

  friend bool operator==(const IdSpace&, const IdSpace&) = default;

private:
  unsigned bits_;
};

/// A point in the address space. Stored as 256 bits, most significant word
/// first, so the defaulted comparison is numeric order.
class Identifier {
public:
  using Words = std::array<std::uint64_t, 4>;

  constexpr Identifier() noexcept = default;
  constexpr explicit Identifier(std::uint64_t low) noexcept : words_{0, 0, 0, low} {}
  constexpr explicit Identifier(const Words& words) noexcept : words_(words) {}

  const Words& words() const noexcept { return words_; }
  std::uint64_t low64() const noexcept { return words_[3]; }
  bool is_zero() const noexcept { return (words_[0] | words_[1] | words_[2] | words_[3]) == 0; }

  /// Index of the most significant set bit, -1 for zero.
  int highest_bit() const noexcept;
  bool bit(unsigned index) const noexcept;

  std::string to_hex(const IdSpace& space) const;
  /// Throws std::invalid_argument on malformed input or a value outside the space.
  static Identifier from_hex(std::string_view text, const IdSpace& space);

  /// Big-endian 32-byte encoding used by the canonical block serialization.
  std::array<std::uint8_t, 32> to_bytes() const noexcept;

  friend constexpr Identifier operator^(const Identifier& a, const Identifier& b) noexcept {
    return Identifier(Words{a.words_[0] ^ b.words_[0], a.words_[1] ^ b.words_[1],
                            a.words_[2] ^ b.words_[2], a.words_[3] ^ b.words_[3]});
  }
  friend constexpr Identifier operator&(const Identifier& a, const Identifier& b) noexcept {
    return Identifier(Words{a.words_[0] & b.words_[0], a.words_[1] & b.words_[1],
                            a.words_[2] & b.words_[2], a.words_[3] & b.words_[3]});
  }
  friend constexpr Identifier operator|(const Identifier& a, const Identifier& b) noexcept {
    return Identifier(Words{a.words_[0] | b.words_[0], a.words_[1] | b.words_[1],
                            a.words_[2] | b.words_[2], a.words_[3] | b.words_[3]});
  }
  friend constexpr Identifier operator~(const Identifier& a) noexcept {
    return Identifier(Words{~a.words_[0], ~a.words_[1], ~a.words_[2], ~a.words_[3]});
  }
  friend constexpr auto operator<=>(const Identifier&, const Identifier&) = default;

  /// Identifier with the low `count` bits set.
  static constexpr Identifier low_mask(unsigned count) noexcept {
    Words w{};
    for (unsigned i = 0; i < 4; ++i) {
      const unsigned low_bit = (3 - i) * 64;
      if (count <= low_bit) continue;
      const unsigned n = count - low_bit;
      w[i] = n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
    }
    return Identifier(w);
  }

private:
  Words words_{};
};

/// XOR distance between two identifiers.
class Distance {
public:
  constexpr Distance() noexcept = default;
  constexpr explicit Distance(const Identifier& magnitude) noexcept : magnitude_(magnitude) {}

  const Identifier& magnitude() const noexcept { return magnitude_; }
  bool is_zero() const noexcept { return magnitude_.is_zero(); }
  /// Routing bucket of a node at this distance: position of the highest set bit.
  int bucket_index() const noexcept { return magnitude_.highest_bit(); }

  friend constexpr auto operator<=>(const Distance&, const Distance&) = default;

private:
  Identifier magnitude_;
};

inline Distance distance(const Identifier& a, const Identifier& b) noexcept { return Distance(a ^ b); }

/// Orders ids by ascending distance to target. Ids are expected to be distinct;
/// XOR then guarantees a strict order.
std::vector<Identifier> sort_by_distance(std::span<const Identifier> ids, const Identifier& target);

/// Uniform draw over the space.
Identifier random_identifier(std::mt19937_64& rng, const IdSpace& space);

/// Draws count distinct identifiers, regenerating collisions with each other
/// and with anything in avoid.
std::vector<Identifier> random_distinct_identifiers(std::mt19937_64& rng, const IdSpace& space,
                                                    std::size_t count,
                                                    std::span<const Identifier> avoid = {});

}  // namespace scalegraph

template <>
struct std::hash<scalegraph::Identifier> {
  std::size_t operator()(const scalegraph::Identifier& id) const noexcept {
    const auto& w = id.words();
    std::uint64_t h = w[3] * 0x9E3779B97F4A7C15ULL;
    h ^= w[2] + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
    h ^= w[1] + 0x94D049BB133111EBULL + (h << 6) + (h >> 2);
    h ^= w[0] + 0xBF58476D1CE4E5B9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};
