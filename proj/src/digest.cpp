#include "scalegraph/digest.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace scalegraph {

Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  return out;
}

Digest sha256(std::string_view data) {
  return sha256(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::string to_hex(const Digest& digest) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (std::uint8_t b : digest) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

Digest digest_from_hex(std::string_view text) {
  if (text.size() != 64) throw std::invalid_argument("digest must be 64 hex digits");
  auto nibble = [&](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw std::invalid_argument("invalid hex digit in digest");
  };
  Digest out{};
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(text[2 * i]) << 4 | nibble(text[2 * i + 1]));
  }
  return out;
}

CanonicalWriter& CanonicalWriter::bytes(std::span<const std::uint8_t> data) {
  const auto len = static_cast<std::uint32_t>(data.size());
  for (int shift = 24; shift >= 0; shift -= 8) buffer_.push_back(static_cast<std::uint8_t>(len >> shift));
  buffer_.insert(buffer_.end(), data.begin(), data.end());
  return *this;
}

CanonicalWriter& CanonicalWriter::text(std::string_view data) {
  return bytes(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

CanonicalWriter& CanonicalWriter::u64(std::uint64_t value) {
  std::array<std::uint8_t, 8> raw{};
  for (std::size_t i = 0; i < 8; ++i) raw[i] = static_cast<std::uint8_t>(value >> (56 - 8 * i));
  return bytes(raw);
}

CanonicalWriter& CanonicalWriter::i64(std::int64_t value) { return u64(static_cast<std::uint64_t>(value)); }

CanonicalWriter& CanonicalWriter::id(const Identifier& value) { return bytes(value.to_bytes()); }

CanonicalWriter& CanonicalWriter::digest(const Digest& value) { return bytes(value); }

}  // namespace scalegraph
