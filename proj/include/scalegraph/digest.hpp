#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scalegraph/ident.hpp"

namespace scalegraph {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view data);

std::string to_hex(const Digest& digest);
/// Throws std::invalid_argument unless text is exactly 64 hex digits.
Digest digest_from_hex(std::string_view text);

/// Canonical serialization: every field is written as a 4-byte big-endian
/// length followed by its bytes, so distinct field sequences never collide.
class CanonicalWriter {
public:
  CanonicalWriter& bytes(std::span<const std::uint8_t> data);
  CanonicalWriter& text(std::string_view data);
  CanonicalWriter& u64(std::uint64_t value);
  CanonicalWriter& i64(std::int64_t value);
  CanonicalWriter& id(const Identifier& value);
  CanonicalWriter& digest(const Digest& value);

  const std::vector<std::uint8_t>& buffer() const noexcept { return buffer_; }
  Digest finish() const { return sha256(buffer_); }

private:
  std::vector<std::uint8_t> buffer_;
};

}  // namespace scalegraph
