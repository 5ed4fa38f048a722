#include "crlmesh/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/obj_mac.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <cstring>
#include <stdexcept>

namespace crlmesh {

namespace {

struct BnFree {
  void operator()(BIGNUM* b) const { BN_clear_free(b); }
};
struct CtxFree {
  void operator()(BN_CTX* c) const { BN_CTX_free(c); }
};
struct PointFree {
  void operator()(EC_POINT* p) const { EC_POINT_free(p); }
};
using BnPtr = std::unique_ptr<BIGNUM, BnFree>;
using CtxPtr = std::unique_ptr<BN_CTX, CtxFree>;
using PointPtr = std::unique_ptr<EC_POINT, PointFree>;

BnPtr new_bn() {
  BnPtr b(BN_new());
  if (!b) throw std::bad_alloc();
  return b;
}

BnPtr bn_from(ByteView bytes) {
  BnPtr b(BN_bin2bn(bytes.data(), static_cast<int>(bytes.size()), nullptr));
  if (!b) throw std::bad_alloc();
  return b;
}

void bn_to32(const BIGNUM* b, std::uint8_t* out) {
  if (BN_bn2binpad(b, out, 32) != 32) throw std::runtime_error("bignum exceeds 32 bytes");
}

/// Process-wide immutable P-256 group and its order.
struct Curve {
  EC_GROUP* group;
  const BIGNUM* order;

  Curve() : group(EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1)), order(nullptr) {
    if (!group) throw std::runtime_error("P-256 unavailable");
    order = EC_GROUP_get0_order(group);
  }
  Curve(const Curve&) = delete;
  ~Curve() { EC_GROUP_free(group); }
};

const Curve& curve() {
  static const Curve c;
  return c;
}

using Mac = std::array<std::uint8_t, 32>;

Mac hmac(const Mac& key, std::initializer_list<ByteView> parts) {
  Bytes msg;
  for (auto p : parts) msg.insert(msg.end(), p.begin(), p.end());
  Mac out{};
  unsigned len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), msg.data(), msg.size(), out.data(), &len);
  return out;
}

PublicKey encode_point(const EC_POINT* point, BN_CTX* ctx) {
  PublicKey pub;
  std::size_t n = EC_POINT_point2oct(curve().group, point, POINT_CONVERSION_COMPRESSED, pub.bytes.data(),
                                     pub.bytes.size(), ctx);
  if (n != kPublicKeySize) throw std::runtime_error("point encoding failed");
  return pub;
}

}  // namespace

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

Bytes from_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) throw DecodeError("odd-length hex string");
  auto nibble = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw DecodeError("invalid hex digit");
  };
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
  return out;
}

Digest hash(ByteView data) {
  Digest d;
  SHA256(data.data(), data.size(), d.bytes.data());
  return d;
}

Digest hash_concat(const Digest& a, const Digest& b) {
  std::array<std::uint8_t, 2 * kDigestSize> buf;
  std::memcpy(buf.data(), a.bytes.data(), kDigestSize);
  std::memcpy(buf.data() + kDigestSize, b.bytes.data(), kDigestSize);
  return hash(buf);
}

Digest iterated_hash(const Digest& seed, std::uint32_t count) {
  if (count == 0) throw std::invalid_argument("iterated_hash: count must be >= 1");
  Digest d = seed;
  for (std::uint32_t i = 0; i < count; ++i) d = hash(d.view());
  return d;
}

struct KeyPair::Impl {
  std::array<std::uint8_t, 32> scalar{};

  ~Impl() { OPENSSL_cleanse(scalar.data(), scalar.size()); }
};

KeyPair KeyPair::from_private_key(ByteView scalar) {
  const Curve& c = curve();
  if (scalar.size() != 32) throw std::invalid_argument("private key must be 32 bytes");
  BnPtr d = bn_from(scalar);
  if (BN_is_zero(d.get()) || BN_cmp(d.get(), c.order) >= 0) throw std::invalid_argument("private key out of range");

  auto impl = std::make_shared<Impl>();
  std::copy(scalar.begin(), scalar.end(), impl->scalar.begin());
  CtxPtr ctx(BN_CTX_new());
  PointPtr q(EC_POINT_new(c.group));
  if (!q || !EC_POINT_mul(c.group, q.get(), d.get(), nullptr, nullptr, ctx.get()))
    throw std::runtime_error("public key derivation failed");
  return KeyPair(std::move(impl), encode_point(q.get(), ctx.get()));
}

KeyPair KeyPair::from_seed(ByteView seed) {
  // Reduce into [1, n-1] so every seed yields a usable key.
  const Curve& c = curve();
  CtxPtr ctx(BN_CTX_new());
  BnPtr d = bn_from(hash(seed).view());
  BnPtr n_minus_1 = new_bn();
  BN_copy(n_minus_1.get(), c.order);
  BN_sub_word(n_minus_1.get(), 1);
  BN_mod(d.get(), d.get(), n_minus_1.get(), ctx.get());
  BN_add_word(d.get(), 1);
  std::array<std::uint8_t, 32> scalar{};
  bn_to32(d.get(), scalar.data());
  KeyPair kp = from_private_key(scalar);
  OPENSSL_cleanse(scalar.data(), scalar.size());
  return kp;
}

KeyPair KeyPair::from_seed(std::uint64_t seed) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(seed >> 32));
  w.u32(static_cast<std::uint32_t>(seed));
  return from_seed(w.bytes());
}

KeyPair KeyPair::generate() {
  std::array<std::uint8_t, 32> seed{};
  if (RAND_bytes(seed.data(), static_cast<int>(seed.size())) != 1) throw std::runtime_error("RAND_bytes failed");
  KeyPair kp = from_seed(seed);
  OPENSSL_cleanse(seed.data(), seed.size());
  return kp;
}

// ECDSA with the nonce from RFC 6979 section 3.2 (HMAC-SHA256, qlen = hlen = 256).
Signature KeyPair::sign(ByteView msg) const {
  const Curve& c = curve();
  CtxPtr ctx(BN_CTX_new());
  Digest h1 = hash(msg);

  BnPtr d = bn_from(impl_->scalar);
  BnPtr e = bn_from(h1.view());
  // bits2octets: reduce the digest once modulo n.
  BnPtr e_mod = new_bn();
  BN_mod(e_mod.get(), e.get(), c.order, ctx.get());
  std::array<std::uint8_t, 32> h1_octets{};
  bn_to32(e_mod.get(), h1_octets.data());

  const std::uint8_t zero = 0x00;
  const std::uint8_t one = 0x01;
  Mac v;
  v.fill(0x01);
  Mac k{};
  k.fill(0x00);
  k = hmac(k, {v, ByteView(&zero, 1), impl_->scalar, h1_octets});
  v = hmac(k, {v});
  k = hmac(k, {v, ByteView(&one, 1), impl_->scalar, h1_octets});
  v = hmac(k, {v});

  BnPtr nonce = new_bn();
  BnPtr r = new_bn();
  BnPtr s = new_bn();
  BnPtr x = new_bn();
  PointPtr point(EC_POINT_new(c.group));
  for (;;) {
    v = hmac(k, {v});
    BN_bin2bn(v.data(), static_cast<int>(v.size()), nonce.get());
    bool usable = !BN_is_zero(nonce.get()) && BN_cmp(nonce.get(), c.order) < 0;
    if (usable) {
      EC_POINT_mul(c.group, point.get(), nonce.get(), nullptr, nullptr, ctx.get());
      EC_POINT_get_affine_coordinates(c.group, point.get(), x.get(), nullptr, ctx.get());
      BN_nnmod(r.get(), x.get(), c.order, ctx.get());
      if (!BN_is_zero(r.get())) {
        // s = k^-1 (e + r d) mod n
        BnPtr tmp = new_bn();
        BN_mod_mul(tmp.get(), r.get(), d.get(), c.order, ctx.get());
        BN_mod_add(tmp.get(), tmp.get(), e.get(), c.order, ctx.get());
        BnPtr kinv(BN_mod_inverse(nullptr, nonce.get(), c.order, ctx.get()));
        BN_mod_mul(s.get(), kinv.get(), tmp.get(), c.order, ctx.get());
        if (!BN_is_zero(s.get())) break;
      }
    }
    k = hmac(k, {v, ByteView(&zero, 1)});
    v = hmac(k, {v});
  }

  Signature sig;
  bn_to32(r.get(), sig.bytes.data());
  bn_to32(s.get(), sig.bytes.data() + 32);
  return sig;
}

bool verify(const PublicKey& pub, ByteView msg, const Signature& sig) {
  const Curve& c = curve();
  CtxPtr ctx(BN_CTX_new());
  if (!ctx) return false;
  PointPtr q(EC_POINT_new(c.group));
  if (!q || EC_POINT_oct2point(c.group, q.get(), pub.bytes.data(), pub.bytes.size(), ctx.get()) != 1) return false;

  BnPtr r = bn_from(ByteView(sig.bytes.data(), 32));
  BnPtr s = bn_from(ByteView(sig.bytes.data() + 32, 32));
  if (BN_is_zero(r.get()) || BN_is_zero(s.get())) return false;
  if (BN_cmp(r.get(), c.order) >= 0 || BN_cmp(s.get(), c.order) >= 0) return false;

  Digest h = hash(msg);
  BnPtr e = bn_from(h.view());
  BnPtr w(BN_mod_inverse(nullptr, s.get(), c.order, ctx.get()));
  if (!w) return false;
  BnPtr u1 = new_bn();
  BnPtr u2 = new_bn();
  BN_mod_mul(u1.get(), e.get(), w.get(), c.order, ctx.get());
  BN_mod_mul(u2.get(), r.get(), w.get(), c.order, ctx.get());

  PointPtr point(EC_POINT_new(c.group));
  if (!point || !EC_POINT_mul(c.group, point.get(), u1.get(), q.get(), u2.get(), ctx.get())) return false;
  if (EC_POINT_is_at_infinity(c.group, point.get())) return false;
  BnPtr x = new_bn();
  if (!EC_POINT_get_affine_coordinates(c.group, point.get(), x.get(), nullptr, ctx.get())) return false;
  BN_nnmod(x.get(), x.get(), c.order, ctx.get());
  return BN_cmp(x.get(), r.get()) == 0;
}

}  // namespace crlmesh
