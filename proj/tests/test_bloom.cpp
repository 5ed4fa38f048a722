#include <doctest.h>

#include <cmath>

#include "crlmesh/bloom.hpp"
#include "crlmesh/rng.hpp"

using namespace crlmesh;
using bloom::BloomFilter;

namespace {

Digest random_digest(Rng& rng) {
  Digest d;
  for (auto& b : d.bytes) b = static_cast<std::uint8_t>(rng.next());
  return d;
}

}  // namespace

TEST_CASE("size_bits closed form") {
  CHECK(bloom::size_bits(10, 1e-20) == 959);
  CHECK((bloom::size_bits(10, 1e-20) + 7) / 8 == 120);
  CHECK(bloom::size_bits(2, 1e-30) == 288);
  CHECK(bloom::size_bits(1, 0.5) == 2);
  CHECK_THROWS(bloom::size_bits(0, 0.1));
  CHECK_THROWS(bloom::size_bits(1, 0.0));
  CHECK_THROWS(bloom::size_bits(1, 1.0));
}

TEST_CASE("optimal_k rounds -log2 p") {
  CHECK(bloom::optimal_k(0.5) == 1);
  CHECK(bloom::optimal_k(1e-22) == 73);
  CHECK(bloom::optimal_k(1e-23) == 76);
  CHECK(bloom::optimal_k(1e-30) == 100);
  // -log2(1e-20) = 66.44; nearest integer is 66.
  CHECK(bloom::optimal_k(1e-20) == 66);
}

TEST_CASE("empty filter contains nothing") {
  auto f = BloomFilter::for_capacity(10, 1e-6);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) CHECK_FALSE(f.contains(random_digest(rng)));
}

TEST_CASE("no false negatives over 1e4 random insert sets") {
  Rng rng(2);
  std::size_t misses = 0;
  for (int set = 0; set < 10'000; ++set) {
    std::size_t n = 1 + rng.below(20);
    auto f = BloomFilter::for_capacity(n, 1e-6);
    std::vector<Digest> xs;
    for (std::size_t i = 0; i < n; ++i) {
      xs.push_back(random_digest(rng));
      f.insert(xs.back());
    }
    for (const auto& x : xs) misses += f.contains(x) ? 0 : 1;
  }
  CHECK(misses == 0);
}

TEST_CASE("empirical false-positive rate at n=1000, p=1e-3") {
  Rng rng(3);
  auto f = BloomFilter::for_capacity(1000, 1e-3);
  for (int i = 0; i < 1000; ++i) f.insert(random_digest(rng));
  std::size_t hits = 0;
  const std::size_t probes = 1'000'000;
  for (std::size_t i = 0; i < probes; ++i) hits += f.contains(random_digest(rng)) ? 1 : 0;
  double fpr = static_cast<double>(hits) / probes;
  CHECK(fpr >= 1e-3 / 3);
  CHECK(fpr <= 3e-3);
}

TEST_CASE("equal parameters and insert order give identical bits") {
  Rng a(4), b(4);
  auto f = BloomFilter::for_capacity(50, 1e-9);
  auto g = BloomFilter::for_capacity(50, 1e-9);
  for (int i = 0; i < 50; ++i) {
    f.insert(random_digest(a));
    g.insert(random_digest(b));
  }
  CHECK(f.serialize() == g.serialize());
}

TEST_CASE("serialization layout and round trip") {
  BloomFilter f(13, 3);
  Bytes x{1, 2, 3};
  f.insert(x);
  Bytes s = f.serialize();
  CHECK(s.size() == 6 + 2);
  CHECK(s[0] == 0x00);
  CHECK(s[1] == 0x03);
  CHECK(Bytes(s.begin() + 2, s.begin() + 6) == Bytes{0, 0, 0, 13});
  auto g = BloomFilter::deserialize(s);
  CHECK(g == f);
  CHECK(g.contains(x));
  CHECK(g.serialized_size() == 6 + (g.m_bits() + 7) / 8);

  Bytes cut(s.begin(), s.end() - 1);
  CHECK_THROWS_AS(BloomFilter::deserialize(cut), DecodeError);
  Bytes extra = s;
  extra.push_back(0);
  CHECK_THROWS_AS(BloomFilter::deserialize(extra), DecodeError);
  Bytes padded = s;
  padded.back() |= 0x01;  // bit 15, beyond m = 13
  CHECK_THROWS_AS(BloomFilter::deserialize(padded), DecodeError);
}

TEST_CASE("bit j sits MSB-first in byte j/8") {
  // A one-hash filter over m = 8 sets exactly one bit; find it and check its position.
  BloomFilter f(8, 1);
  Bytes x{9};
  f.insert(x);
  Bytes s = f.serialize();
  int set_bits = 0;
  for (int j = 0; j < 8; ++j) set_bits += (s[6] >> j) & 1;
  CHECK(set_bits == 1);
  // Index of x is the first 8 bytes of H(H(x) || 0u32) mod 8: the low 3 bits of byte 7.
  ByteWriter w;
  w.raw(hash(x).view());
  w.u32(0);
  unsigned idx = hash(w.bytes()).bytes[7] & 7u;
  CHECK(s[6] == (0x80u >> idx));
}

TEST_CASE("constructor guards") {
  CHECK_THROWS(BloomFilter(0, 1));
  CHECK_THROWS(BloomFilter(1, 0));
}

TEST_CASE("random pieces do not pass a strong fingerprint") {
  Rng rng(99);
  auto f = BloomFilter::for_capacity(10, 1e-30);
  auto random_digest = [&] {
    Digest d;
    for (auto& b : d.bytes) b = static_cast<std::uint8_t>(rng.next());
    return d;
  };
  for (int i = 0; i < 10; ++i) f.insert(random_digest());
  int admitted = 0;
  for (int i = 0; i < 20'000; ++i) admitted += f.contains(random_digest()) ? 1 : 0;
  CHECK(admitted == 0);
}
