#include "scalegraph/auth.hpp"

namespace scalegraph {

Authenticator::Authenticator(std::uint64_t master_seed) : master_seed_(master_seed) {}

Signer Authenticator::signer_for(const Identifier& identity) const { return Signer(this, identity); }

Digest Authenticator::tag(const Identifier& identity, const Digest& message) const {
  const Digest key = CanonicalWriter().text("scalegraph/sim-key").u64(master_seed_).id(identity).finish();
  return CanonicalWriter().digest(key).digest(message).finish();
}

bool Authenticator::verify(const Signature& signature, const Digest& message) const {
  return signature.tag == tag(signature.signer, message);
}

Signature Signer::sign(const Digest& message) const { return Signature{identity_, auth_->tag(identity_, message)}; }

}  // namespace scalegraph
