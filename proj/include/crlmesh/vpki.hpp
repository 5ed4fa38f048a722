#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "crlmesh/bloom.hpp"
#include "crlmesh/bytes.hpp"
#include "crlmesh/crypto.hpp"
#include "crlmesh/rng.hpp"

namespace crlmesh::vpki {

using Timestamp = std::uint32_t;  // seconds since simulation epoch

/// Issuance and revocation time grid. Pseudonym lifetime divides the issue
/// interval, which divides the CRL window; all grids start at epoch 0.
struct TimeGrid {
  std::uint32_t pseudonym_lifetime_s = 60;
  std::uint32_t issue_interval_s = 60;
  std::uint32_t crl_window_s = 3600;

  void validate() const;
  std::uint32_t batch_size() const { return issue_interval_s / pseudonym_lifetime_s; }
  std::uint32_t issue_slot_of(Timestamp t) const { return t / issue_interval_s; }
  std::uint32_t crl_window_of(Timestamp t) const { return t / crl_window_s; }
  Timestamp crl_window_start(std::uint32_t window) const { return window * crl_window_s; }
  /// Validity window of the 1-based `position`-th pseudonym in issue slot `slot`.
  std::pair<Timestamp, Timestamp> validity(std::uint32_t slot, std::uint32_t position) const;
};

class VpkiError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Ticket {
  Digest ik_tkt;
  Timestamp valid_from = 0;
  Timestamp valid_to = 0;
  Signature ltca_signature;

  Bytes signed_payload() const;
};

/// Stub long-term CA: signs tickets over (ik_tkt, validity) and nothing else.
class Ltca {
 public:
  explicit Ltca(KeyPair key) : key_(std::move(key)) {}
  Ticket issue_ticket(const Digest& ik_tkt, Timestamp valid_from, Timestamp valid_to) const;
  const PublicKey& public_key() const { return key_.public_key(); }

 private:
  KeyPair key_;
};

struct Pseudonym {
  Digest serial_number;
  PublicKey public_key;
  std::uint32_t crl_version = 0;
  std::optional<bloom::BloomFilter> fingerprint;
  Digest rik;
  Timestamp valid_from = 0;
  Timestamp valid_to = 0;
  Signature pca_signature;

  /// The signed tuple: SN | K | crl_version | t_s | t_e | carrier flag | [bloom] | RIK.
  Bytes signed_payload() const;
  Bytes encode() const;
  static Pseudonym decode(ByteView in);
  static Pseudonym read_from(ByteReader& r);
  void encode_into(ByteWriter& w) const;
  std::size_t encoded_size() const;

  bool verify_issuer(const PublicKey& pca) const { return verify(pca, signed_payload(), pca_signature); }
  bool valid_at(Timestamp t) const { return valid_from <= t && t < valid_to; }
  bool operator==(const Pseudonym&) const = default;
};

struct CrlEntry {
  static constexpr std::size_t kEncodedSize = 65;

  Digest anchor_sn;
  Digest chain_seed;
  std::uint8_t remaining = 0;

  void encode_into(ByteWriter& w) const;
  static CrlEntry read_from(ByteReader& r);
  auto operator<=>(const CrlEntry&) const = default;
};

struct CrlPiece {
  static constexpr std::uint8_t kVersion = 1;
  static constexpr std::size_t kHeaderSize = 13;

  std::uint8_t version = kVersion;
  std::uint32_t gamma_crl_index = 0;
  std::uint16_t piece_index = 0;
  std::uint16_t total_pieces = 0;
  std::vector<CrlEntry> entries;

  Bytes encode() const;
  static CrlPiece decode(ByteView in);
  std::size_t encoded_size() const { return kHeaderSize + entries.size() * CrlEntry::kEncodedSize; }
  /// Element inserted into the fingerprint: SHA-256 of the canonical encoding.
  Digest digest() const { return hash(encode()); }
  bool operator==(const CrlPiece&) const = default;
};

struct SignedFingerprint {
  std::uint32_t gamma_crl_index = 0;
  std::uint16_t total_pieces = 0;
  bloom::BloomFilter filter{1, 1};
  Signature pca_signature;

  Bytes signed_payload() const;
  Bytes encode() const;
  static SignedFingerprint decode(ByteView in);
  std::size_t encoded_size() const { return 6 + filter.serialized_size() + kSignatureSize; }
  bool verify_issuer(const PublicKey& pca) const { return verify(pca, signed_payload(), pca_signature); }
  bool admits(const CrlPiece& piece) const;
  bool operator==(const SignedFingerprint&) const = default;
};

/// Proof of possession for a pseudonym key: the key signs its own encoding.
Signature prove_possession(const KeyPair& key);

struct IssuanceRequest {
  Ticket ticket;
  std::uint32_t issue_slot = 0;
  std::vector<PublicKey> public_keys;
  std::vector<Signature> proofs;
  bool carrier = false;
};

/// Vehicle side: deterministic pseudonym keys and the matching request.
std::vector<KeyPair> derive_pseudonym_keys(std::uint64_t seed, std::size_t count);
IssuanceRequest make_request(const Ticket& ticket, std::uint32_t issue_slot, std::span<const KeyPair> keys,
                             bool carrier);

struct IssuanceResponse {
  std::vector<Pseudonym> pseudonyms;
  Digest rnd_v;
};

struct IssuanceRecord {
  Digest ik_tkt;
  Digest rnd_v;
  Digest first_sn;
  std::uint32_t batch_size = 0;
  std::uint32_t issue_slot = 0;
  std::uint32_t gamma_index = 0;  // CRL window of the batch
  std::vector<Digest> serials;    // issuer-side copy, used for resolution and audits
};

/// RIK of the `position`-th (1-based) pseudonym of a batch.
Digest revocation_identifiable_key(const Digest& ik_tkt, const PublicKey& key, Timestamp t_s, Timestamp t_e,
                                   const Digest& seed_at_position);

/// Serial numbers of a batch. `keys[i]` and `validity[i]` belong to pseudonym i+1.
std::vector<Digest> chain_serials(const Digest& ik_tkt, const Digest& rnd_v, std::span<const PublicKey> keys,
                                  std::span<const std::pair<Timestamp, Timestamp>> validity,
                                  std::vector<Digest>* riks = nullptr);

/// Published state of one CRL window.
struct PublishedCrl {
  std::vector<CrlPiece> pieces;
  SignedFingerprint fingerprint;
};

struct PcaConfig {
  TimeGrid grid;
  std::size_t piece_budget_bytes = 25'000;
  double fingerprint_fpr = 1e-30;
  double carrier_probability = 0.2;
};

/// Pseudonym CA with the revocation registry. Single writer: callers
/// serialize mutation; returned CRL snapshots are immutable values.
class Pca {
 public:
  Pca(KeyPair key, PublicKey ltca_key, PcaConfig config, std::uint64_t seed);

  const PublicKey& public_key() const { return key_.public_key(); }
  const PcaConfig& config() const { return config_; }

  IssuanceResponse issue_pseudonyms(const IssuanceRequest& request, Timestamp now);
  /// Carrier flag drawn with the configured probability.
  bool draw_carrier();

  /// Entries for every batch of `ik_tkt` still valid at `at_time`; repeated calls are no-ops.
  std::vector<std::pair<std::uint32_t, CrlEntry>> revoke_vehicle(const Digest& ik_tkt, Timestamp at_time);

  std::vector<CrlPiece> build_crl(std::uint32_t gamma_crl_index, std::size_t byte_budget) const;
  SignedFingerprint build_fingerprint(std::span<const CrlPiece> pieces, double target_fpr) const;
  SignedFingerprint build_fingerprint(std::uint32_t gamma_crl_index, std::span<const CrlPiece> pieces,
                                      double target_fpr) const;
  /// Pieces and fingerprint for a window at the configured budget and rate, cached until the registry changes.
  const PublishedCrl& published(std::uint32_t gamma_crl_index);

  /// Registers an entry produced outside this instance (revocations of the wider
  /// domain population that the simulator does not model vehicle by vehicle).
  void add_entry(std::uint32_t gamma_crl_index, const CrlEntry& entry, std::span<const Digest> covered_serials);

  const std::vector<CrlEntry>& entries_for(std::uint32_t gamma_crl_index) const;
  const std::vector<IssuanceRecord>& records_for(const Digest& ik_tkt) const;
  /// Issuer-side ground truth: every SN covered by entries of the window.
  std::vector<Digest> revoked_serials(std::uint32_t gamma_crl_index) const;

 private:
  KeyPair key_;
  PublicKey ltca_key_;
  PcaConfig config_;
  Rng rng_;
  std::map<Digest, std::vector<IssuanceRecord>> records_;
  std::map<Digest, Timestamp> revoked_at_;
  std::map<std::uint32_t, std::vector<CrlEntry>> registry_;
  std::map<std::uint32_t, std::vector<Digest>> revoked_serials_;
  std::map<std::uint32_t, PublishedCrl> published_;
};

/// Splits entries into ceil(size / budget) pieces of near-equal entry counts.
/// Shared by the PCA and the baseline full-day CRL.
std::vector<CrlPiece> split_entries(std::uint32_t gamma_crl_index, std::span<const CrlEntry> entries,
                                    std::size_t byte_budget);

}  // namespace crlmesh::vpki
