#pragma once

#include <cstdint>

#include "scalegraph/digest.hpp"
#include "scalegraph/ident.hpp"

namespace scalegraph {

struct Signature {
  Identifier signer;
  Digest tag{};

  friend bool operator==(const Signature&, const Signature&) = default;
};

class Signer;

/// Simulated signature scheme. Tags are keyed digests under per-identity
/// secrets derived from a master seed that only the authenticator holds, so
/// code handed a Signer for one identity cannot produce tags for another.
class Authenticator {
public:
  explicit Authenticator(std::uint64_t master_seed);

  Signer signer_for(const Identifier& identity) const;
  bool verify(const Signature& signature, const Digest& message) const;

private:
  friend class Signer;
  Digest tag(const Identifier& identity, const Digest& message) const;

  std::uint64_t master_seed_;
};

/// Signing capability bound to a single identity.
class Signer {
public:
  Signature sign(const Digest& message) const;
  const Identifier& identity() const noexcept { return identity_; }

private:
  friend class Authenticator;
  Signer(const Authenticator* auth, Identifier identity) : auth_(auth), identity_(identity) {}

  const Authenticator* auth_;
  Identifier identity_;
};

}  // namespace scalegraph
