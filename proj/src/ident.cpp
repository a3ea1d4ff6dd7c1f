#include "scalegraph/ident.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>
#include <unordered_set>

namespace scalegraph {

IdSpace::IdSpace(unsigned bits) : bits_(bits) {
  if (bits == 0 || bits > kMaxIdBits) {
    throw std::invalid_argument("identifier width must be in [1, 256], got " + std::to_string(bits));
  }
}

bool IdSpace::contains(const Identifier& id) const noexcept {
  return id.highest_bit() < static_cast<int>(bits_);
}

int Identifier::highest_bit() const noexcept {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] != 0) {
      const int word_top = 63 - std::countl_zero(words_[i]);
      return static_cast<int>((words_.size() - 1 - i) * 64) + word_top;
    }
  }
  return -1;
}

bool Identifier::bit(unsigned index) const noexcept {
  if (index >= kMaxIdBits) return false;
  return (words_[3 - index / 64] >> (index % 64)) & 1U;
}

std::string Identifier::to_hex(const IdSpace& space) const {
  static constexpr char kDigits[] = "0123456789abcdef";
  const unsigned digits = space.hex_digits();
  std::string out(digits, '0');
  for (unsigned d = 0; d < digits; ++d) {
    const unsigned nibble_index = digits - 1 - d;
    const unsigned bit_pos = nibble_index * 4;
    const std::uint64_t word = words_[3 - bit_pos / 64];
    out[d] = kDigits[(word >> (bit_pos % 64)) & 0xF];
  }
  return out;
}

Identifier Identifier::from_hex(std::string_view text, const IdSpace& space) {
  if (text.empty() || text.size() > 64) {
    throw std::invalid_argument("identifier hex must have 1..64 digits");
  }
  Words words{};
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[text.size() - 1 - i];
    unsigned v;
    if (c >= '0' && c <= '9') v = static_cast<unsigned>(c - '0');
    else if (c >= 'a' && c <= 'f') v = static_cast<unsigned>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') v = static_cast<unsigned>(c - 'A' + 10);
    else throw std::invalid_argument("invalid hex digit in identifier: " + std::string(text));
    const std::size_t bit_pos = i * 4;
    words[3 - bit_pos / 64] |= static_cast<std::uint64_t>(v) << (bit_pos % 64);
  }
  Identifier id(words);
  if (!space.contains(id)) {
    throw std::invalid_argument("identifier " + std::string(text) + " exceeds " +
                                std::to_string(space.bits()) + "-bit space");
  }
  return id;
}

std::array<std::uint8_t, 32> Identifier::to_bytes() const noexcept {
  std::array<std::uint8_t, 32> out{};
  for (std::size_t w = 0; w < 4; ++w) {
    for (std::size_t b = 0; b < 8; ++b) {
      out[w * 8 + b] = static_cast<std::uint8_t>(words_[w] >> (56 - 8 * b));
    }
  }
  return out;
}

std::vector<Identifier> sort_by_distance(std::span<const Identifier> ids, const Identifier& target) {
  std::vector<Identifier> out(ids.begin(), ids.end());
  std::sort(out.begin(), out.end(), [&](const Identifier& a, const Identifier& b) {
    return distance(a, target) < distance(b, target);
  });
  return out;
}

Identifier random_identifier(std::mt19937_64& rng, const IdSpace& space) {
  Identifier::Words words{};
  const unsigned bits = space.bits();
  for (unsigned w = 0; w < 4; ++w) {
    const unsigned low_bit = (3 - w) * 64;
    if (low_bit >= bits) continue;
    std::uint64_t value = rng();
    const unsigned available = bits - low_bit;
    if (available < 64) value &= (std::uint64_t{1} << available) - 1;
    words[w] = value;
  }
  return Identifier(words);
}

std::vector<Identifier> random_distinct_identifiers(std::mt19937_64& rng, const IdSpace& space,
                                                    std::size_t count,
                                                    std::span<const Identifier> avoid) {
  if (space.bits() < 64 && count + avoid.size() > (std::uint64_t{1} << space.bits())) {
    throw std::invalid_argument("not enough distinct identifiers in the space");
  }
  std::unordered_set<Identifier> seen(avoid.begin(), avoid.end());
  std::vector<Identifier> out;
  out.reserve(count);
  while (out.size() < count) {
    Identifier id = random_identifier(rng, space);
    if (seen.insert(id).second) out.push_back(id);
  }
  return out;
}

}  // namespace scalegraph
