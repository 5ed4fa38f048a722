#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <string>

#include "crlmesh/bytes.hpp"

namespace crlmesh {

inline constexpr std::size_t kDigestSize = 32;
inline constexpr std::size_t kSignatureSize = 64;
inline constexpr std::size_t kPublicKeySize = 33;

/// SHA-256 output.
struct Digest {
  std::array<std::uint8_t, kDigestSize> bytes{};

  auto operator<=>(const Digest&) const = default;
  ByteView view() const { return bytes; }
  std::string hex() const { return to_hex(bytes); }
};

/// Raw r||s encoding, each 32 bytes big-endian.
struct Signature {
  std::array<std::uint8_t, kSignatureSize> bytes{};

  bool operator==(const Signature&) const = default;
  ByteView view() const { return bytes; }
};

/// SEC1 compressed P-256 point.
struct PublicKey {
  std::array<std::uint8_t, kPublicKeySize> bytes{};

  auto operator<=>(const PublicKey&) const = default;
  ByteView view() const { return bytes; }
};

Digest hash(ByteView data);
Digest hash_concat(const Digest& a, const Digest& b);

/// H applied `count` times to `seed`; `count` must be at least 1.
Digest iterated_hash(const Digest& seed, std::uint32_t count);

/// ECDSA P-256 key pair with deterministic (RFC 6979) signing.
///
/// The private scalar never leaves this object; copies share the same
/// immutable key material.
class KeyPair {
 public:
  /// Derives a key deterministically from `seed` (hashed and reduced mod n).
  static KeyPair from_seed(ByteView seed);
  static KeyPair from_seed(std::uint64_t seed);
  /// 32-byte big-endian scalar in [1, n-1].
  static KeyPair from_private_key(ByteView scalar);
  /// Fresh key from the OpenSSL CSPRNG.
  static KeyPair generate();

  const PublicKey& public_key() const { return public_; }
  Signature sign(ByteView msg) const;

 private:
  struct Impl;
  explicit KeyPair(std::shared_ptr<const Impl> impl, PublicKey pub)
      : impl_(std::move(impl)), public_(pub) {}

  std::shared_ptr<const Impl> impl_;
  PublicKey public_;
};

/// False for malformed keys, malformed signatures, or a mismatch. Never throws.
bool verify(const PublicKey& pub, ByteView msg, const Signature& sig);

}  // namespace crlmesh
