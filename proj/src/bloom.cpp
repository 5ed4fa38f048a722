#include "crlmesh/bloom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace crlmesh::bloom {

namespace {

void check_fpr(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("false-positive rate must lie in (0, 1)");
}

std::uint64_t load_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

std::uint64_t size_bits(std::uint64_t n_elements, double target_fpr) {
  check_fpr(target_fpr);
  if (n_elements == 0) throw std::invalid_argument("size_bits: need at least one element");
  const double ln2 = std::log(2.0);
  double bits = -static_cast<double>(n_elements) * std::log(target_fpr) / (ln2 * ln2);
  return static_cast<std::uint64_t>(std::ceil(bits));
}

std::uint32_t optimal_k(double target_fpr) {
  check_fpr(target_fpr);
  return static_cast<std::uint32_t>(std::lround(-std::log2(target_fpr)));
}

BloomFilter::BloomFilter(std::uint32_t m_bits, std::uint16_t k_hashes)
    : m_bits_(m_bits), k_hashes_(k_hashes), bits_((static_cast<std::size_t>(m_bits) + 7) / 8, 0) {
  if (m_bits == 0) throw std::invalid_argument("bloom filter needs m_bits >= 1");
  if (k_hashes == 0) throw std::invalid_argument("bloom filter needs k_hashes >= 1");
}

BloomFilter BloomFilter::for_capacity(std::uint64_t n_elements, double target_fpr) {
  std::uint64_t m = size_bits(n_elements, target_fpr);
  std::uint32_t k = optimal_k(target_fpr);
  if (m > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("bloom filter too large");
  if (k > std::numeric_limits<std::uint16_t>::max()) throw std::invalid_argument("too many hash functions");
  return BloomFilter(static_cast<std::uint32_t>(m), static_cast<std::uint16_t>(k == 0 ? 1 : k));
}

template <typename Fn>
void BloomFilter::for_each_index(ByteView element, Fn&& fn) const {
  // Blocks are computed lazily so a failed membership test stops early.
  std::array<std::uint8_t, kDigestSize + 4> in{};
  const Digest d = hash(element);
  std::copy(d.bytes.begin(), d.bytes.end(), in.begin());
  Digest block;
  for (std::uint32_t i = 0; i < k_hashes_; ++i) {
    if (i % 4 == 0) {
      const std::uint32_t j = i / 4;
      for (int b = 0; b < 4; ++b) in[kDigestSize + b] = static_cast<std::uint8_t>(j >> (24 - 8 * b));
      block = hash(in);
    }
    const auto v = load_u64(block.bytes.data() + 8 * (i % 4));
    if (!fn(static_cast<std::uint32_t>(v % m_bits_))) return;
  }
}

void BloomFilter::insert(ByteView element) {
  for_each_index(element, [this](std::uint32_t j) {
    bits_[j >> 3] |= static_cast<std::uint8_t>(0x80u >> (j & 7));
    return true;
  });
  ++inserted_;
}

bool BloomFilter::contains(ByteView element) const {
  bool all = true;
  for_each_index(element, [&](std::uint32_t j) {
    all = (bits_[j >> 3] & (0x80u >> (j & 7))) != 0;
    return all;
  });
  return all;
}

void BloomFilter::serialize_into(ByteWriter& w) const {
  w.u16(k_hashes_);
  w.u32(m_bits_);
  w.raw(bits_);
}

Bytes BloomFilter::serialize() const {
  ByteWriter w(serialized_size());
  serialize_into(w);
  return std::move(w).take();
}

BloomFilter BloomFilter::read_from(ByteReader& r) {
  std::uint16_t k = r.u16();
  std::uint32_t m = r.u32();
  if (k == 0 || m == 0) throw DecodeError("bloom filter: zero parameter");
  BloomFilter f(m, k);
  auto body = r.raw(f.bits_.size());
  std::copy(body.begin(), body.end(), f.bits_.begin());
  if (m % 8 != 0) {
    // Padding bits past m must be clear for the encoding to be canonical.
    std::uint8_t pad_mask = static_cast<std::uint8_t>(0xffu >> (m % 8));
    if (f.bits_.back() & pad_mask) throw DecodeError("bloom filter: nonzero padding bits");
  }
  return f;
}

BloomFilter BloomFilter::deserialize(ByteView in) {
  ByteReader r(in);
  BloomFilter f = read_from(r);
  r.expect_end("bloom filter");
  return f;
}

}  // namespace crlmesh::bloom
