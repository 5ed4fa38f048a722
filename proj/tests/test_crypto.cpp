#include <doctest.h>

#include <set>
#include <string>

#include "crlmesh/crypto.hpp"
#include "crlmesh/rng.hpp"

using namespace crlmesh;

namespace {

Bytes str(const std::string& s) { return Bytes(s.begin(), s.end()); }

Bytes random_bytes(Rng& rng, std::size_t n) {
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng.next());
  return b;
}

}  // namespace

TEST_CASE("sha256 of the empty string") {
  CHECK(hash({}).hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("sha256 of abc") {
  CHECK(hash(str("abc")).hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("iterated hash matches a plain loop") {
  Digest seed = hash(str("seed"));
  std::vector<Digest> memo{seed};
  for (int i = 1; i <= 100; ++i) memo.push_back(hash(memo.back().view()));
  for (std::uint32_t c = 1; c <= 100; ++c) CHECK(iterated_hash(seed, c) == memo[c]);
  CHECK(iterated_hash(seed, 1) == hash(seed.view()));
  CHECK_THROWS_AS(iterated_hash(seed, 0), std::invalid_argument);
}

TEST_CASE("iterated hash composes") {
  Digest s = hash(str("compose"));
  for (std::uint32_t a = 1; a <= 7; ++a)
    for (std::uint32_t b = 1; b <= 7; ++b) CHECK(iterated_hash(s, a + b) == iterated_hash(iterated_hash(s, a), b));
}

TEST_CASE("no digest collisions over 1e5 distinct inputs") {
  std::set<Digest> seen;
  ByteWriter w;
  for (std::uint32_t i = 0; i < 100'000; ++i) {
    ByteWriter one;
    one.u32(i);
    seen.insert(hash(one.bytes()));
  }
  CHECK(seen.size() == 100'000);
}

TEST_CASE("RFC 6979 A.2.5 P-256 SHA-256 vector for 'sample'") {
  auto key = KeyPair::from_private_key(from_hex("C9AFA9D845BA75166B5C215767B1D6934E50C3DB36E89B127B8A622B120F6721"));
  // Ux = 60FED4BA255A9D31C961EB74C6356D68C049B8923B61FA6CE669622E60F29FB6, Uy odd
  CHECK(to_hex(key.public_key().bytes) == "0360fed4ba255a9d31c961eb74c6356d68c049b8923b61fa6ce669622e60f29fb6");
  Signature sig = key.sign(str("sample"));
  CHECK(to_hex(ByteView(sig.bytes).first(32)) == "efd48b2aacb6a8fd1140dd9cd45e81d69d2c877b56aaf991c34d0ea84eaf3716");
  CHECK(to_hex(ByteView(sig.bytes).last(32)) == "f7cb1c942d657c41d436c7a1b6e29f65f3e900dbb9aff4064dc4ab2f843acda8");
  CHECK(verify(key.public_key(), str("sample"), sig));
}

TEST_CASE("RFC 6979 A.2.5 P-256 SHA-256 vector for 'test'") {
  auto key = KeyPair::from_private_key(from_hex("C9AFA9D845BA75166B5C215767B1D6934E50C3DB36E89B127B8A622B120F6721"));
  Signature sig = key.sign(str("test"));
  CHECK(to_hex(ByteView(sig.bytes).first(32)) == "f1abb023518351cd71d881567b1ea663ed3efcf6c5132b354f28d3b0b7d38367");
  CHECK(to_hex(ByteView(sig.bytes).last(32)) == "019f4113742a2b14bd25926b49c649155f267e60d3814b4c0cc84250e46f0083");
}

TEST_CASE("signing is deterministic and keys from seeds are stable") {
  auto a = KeyPair::from_seed(42);
  auto b = KeyPair::from_seed(42);
  CHECK(a.public_key() == b.public_key());
  CHECK(a.sign(str("m")) == b.sign(str("m")));
  CHECK_FALSE(KeyPair::from_seed(43).public_key() == a.public_key());
}

TEST_CASE("signature mutation test") {
  Rng rng(7);
  auto key = KeyPair::from_seed(1);
  int rejected = 0;
  for (int i = 0; i < 1000; ++i) {
    Bytes msg = random_bytes(rng, 1 + rng.below(64));
    Signature sig = key.sign(msg);
    REQUIRE(verify(key.public_key(), msg, sig));
    if (i % 2 == 0) {
      msg[rng.below(msg.size())] ^= static_cast<std::uint8_t>(1u << rng.below(8));
    } else {
      sig.bytes[rng.below(sig.bytes.size())] ^= static_cast<std::uint8_t>(1u << rng.below(8));
    }
    if (!verify(key.public_key(), msg, sig)) ++rejected;
  }
  CHECK(rejected == 1000);
}

TEST_CASE("malformed inputs verify false without throwing") {
  auto key = KeyPair::from_seed(3);
  Signature sig = key.sign(str("x"));
  PublicKey bogus;
  bogus.bytes.fill(0xff);
  CHECK_FALSE(verify(bogus, str("x"), sig));
  Signature zero;
  CHECK_FALSE(verify(key.public_key(), str("x"), zero));
  Signature big;
  big.bytes.fill(0xff);
  CHECK_FALSE(verify(key.public_key(), str("x"), big));
  CHECK_FALSE(verify(KeyPair::from_seed(4).public_key(), str("x"), sig));
}

TEST_CASE("private key range is enforced") {
  CHECK_THROWS(KeyPair::from_private_key(Bytes(32, 0)));
  CHECK_THROWS(KeyPair::from_private_key(Bytes(31, 1)));
  CHECK_THROWS(KeyPair::from_private_key(Bytes(32, 0xff)));
}

TEST_CASE("hex round trip") {
  Bytes b{0x00, 0x01, 0xab, 0xff};
  CHECK(to_hex(b) == "0001abff");
  CHECK(from_hex("0001ABff") == b);
  CHECK_THROWS_AS(from_hex("abc"), DecodeError);
  CHECK_THROWS_AS(from_hex("zz"), DecodeError);
}
