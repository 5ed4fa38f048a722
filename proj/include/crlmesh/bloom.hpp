#pragma once

#include <cstdint>
#include <vector>

#include "crlmesh/bytes.hpp"
#include "crlmesh/crypto.hpp"

namespace crlmesh::bloom {

/// Bits needed for `n_elements` at false-positive rate `target_fpr`:
/// ceil(-n ln p / (ln 2)^2).
std::uint64_t size_bits(std::uint64_t n_elements, double target_fpr);

/// round(-log2 p).
std::uint32_t optimal_k(double target_fpr);

/// Plain (non-counting) Bloom filter over byte strings.
///
/// Index i of element x is u64_be(B_{i/4}[8*(i%4) .. +8]) mod m, where
/// B_j = SHA-256(SHA-256(x) || u32_be j). Every index comes from its own
/// hash output; double hashing lets a forgery that shares the step of a member
/// replay most of that member's indexes, which is far likelier than p at K=100.
class BloomFilter {
 public:
  BloomFilter(std::uint32_t m_bits, std::uint16_t k_hashes);

  /// Sized for n elements at the target rate; k = optimal_k(p).
  static BloomFilter for_capacity(std::uint64_t n_elements, double target_fpr);

  void insert(ByteView element);
  bool contains(ByteView element) const;
  void insert(const Digest& d) { insert(d.view()); }
  bool contains(const Digest& d) const { return contains(d.view()); }

  std::uint32_t m_bits() const { return m_bits_; }
  std::uint16_t k_hashes() const { return k_hashes_; }
  std::uint64_t inserted_count() const { return inserted_; }
  std::size_t byte_size() const { return bits_.size(); }

  /// u16 k | u32 m | ceil(m/8) bytes, big-endian; bit j lives in byte j/8 at (j % 8) from the MSB.
  Bytes serialize() const;
  void serialize_into(ByteWriter& w) const;
  static BloomFilter deserialize(ByteView in);
  static BloomFilter read_from(ByteReader& r);
  std::size_t serialized_size() const { return 6 + bits_.size(); }

  /// Bit contents and parameters; the insertion counter is local bookkeeping.
  bool operator==(const BloomFilter& o) const {
    return m_bits_ == o.m_bits_ && k_hashes_ == o.k_hashes_ && bits_ == o.bits_;
  }

 private:
  template <typename Fn>
  void for_each_index(ByteView element, Fn&& fn) const;

  std::uint32_t m_bits_;
  std::uint16_t k_hashes_;
  std::uint64_t inserted_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace crlmesh::bloom
