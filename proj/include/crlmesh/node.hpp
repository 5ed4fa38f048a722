#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "crlmesh/crypto.hpp"
#include "crlmesh/rng.hpp"
#include "crlmesh/vpki.hpp"

namespace crlmesh::node {

/// Bytes charged per signature in security-overhead accounting.
inline constexpr std::size_t kWireSignatureOverhead = 72;

// ---- parsing and the local store ----

/// {anchor} plus `remaining` successors: seed <- H(seed), sn <- H(sn || seed).
std::vector<Digest> derive_serials(const vpki::CrlEntry& entry);
std::vector<Digest> parse_entries(std::span<const vpki::CrlPiece> pieces);

class RevocationStore {
 public:
  void add(std::uint32_t gamma_crl_index, std::span<const Digest> serials);
  /// Derives and stores every SN of the pieces; returns the number of new SNs.
  std::size_t add_pieces(std::uint32_t gamma_crl_index, std::span<const vpki::CrlPiece> pieces);

  bool contains(const Digest& sn) const;
  bool contains(std::uint32_t gamma_crl_index, const Digest& sn) const;
  std::size_t size() const;
  std::size_t size(std::uint32_t gamma_crl_index) const;
  /// Drops all windows strictly before `gamma_crl_index`.
  void evict_before(std::uint32_t gamma_crl_index);

  /// Comparisons made by the most recent lookup.
  std::size_t last_lookup_comparisons() const { return comparisons_; }

 private:
  std::map<std::uint32_t, std::vector<Digest>> windows_;  // each vector sorted, unique
  mutable std::size_t comparisons_ = 0;
};

// ---- pieces as received ----

/// A piece together with facts computed once when it is put on the air.
struct PieceHandle {
  std::shared_ptr<const vpki::CrlPiece> piece;
  Digest digest;
  std::size_t wire_size = 0;
  bool signature_valid = true;  // per-piece signature, signed mode only

  static PieceHandle make(std::shared_ptr<const vpki::CrlPiece> piece, std::size_t signature_bytes = 0,
                          bool signature_valid = true);
  std::uint32_t gamma() const { return piece->gamma_crl_index; }
  std::uint16_t index() const { return piece->piece_index; }
  std::uint16_t total() const { return piece->total_pieces; }
};

enum class Verdict { Accepted, Duplicate, Rejected, Buffered, BufferFull, Mismatch };

/// Pieces of one window held by a node.
///
/// Fingerprint mode accepts a piece only if its digest passes the BF test of
/// an installed fingerprint; until one arrives, pieces wait in a buffer capped
/// at twice the claimed piece count. Signed mode trusts the per-piece
/// signature flag and learns N from a notification or any valid piece.
class PieceLedger {
 public:
  enum class Mode { Fingerprint, Signed };

  static constexpr std::size_t kBufferHardCap = 64;

  PieceLedger(std::uint32_t gamma_crl_index, Mode mode);

  /// Caller has verified the fingerprint signature. Returns how many buffered
  /// pieces were accepted; the rest are counted as rejected.
  std::size_t install_fingerprint(std::shared_ptr<const vpki::SignedFingerprint> fp);
  /// Signed mode: total piece count from an authenticated notification.
  void set_total(std::uint16_t total);

  Verdict offer(const PieceHandle& h);

  std::uint32_t gamma() const { return gamma_; }
  Mode mode() const { return mode_; }
  bool knows_total() const { return total_.has_value(); }
  std::uint16_t total() const { return total_.value_or(0); }
  bool has_fingerprint() const { return fingerprint_ != nullptr; }
  const vpki::SignedFingerprint* fingerprint() const { return fingerprint_.get(); }
  bool complete() const { return total_.has_value() && held_ == *total_; }
  std::size_t held_count() const { return held_; }
  bool has(std::uint16_t index) const { return index < pieces_.size() && pieces_[index].piece != nullptr; }
  const PieceHandle* piece(std::uint16_t index) const { return has(index) ? &pieces_[index] : nullptr; }
  /// True if a piece claiming this header would be of use.
  bool wants(std::uint32_t gamma, std::uint16_t index, std::uint16_t total) const;
  std::vector<std::uint16_t> missing() const;
  std::vector<std::uint16_t> held_indexes() const;
  std::vector<vpki::CrlPiece> pieces() const;

  std::size_t rejected_count() const { return rejected_; }
  std::size_t buffered_count() const { return buffer_.size(); }

 private:
  Verdict store(const PieceHandle& h);
  bool authentic(const PieceHandle& h) const;

  std::uint32_t gamma_;
  Mode mode_;
  std::optional<std::uint16_t> total_;
  std::shared_ptr<const vpki::SignedFingerprint> fingerprint_;
  std::vector<PieceHandle> pieces_;
  std::size_t held_ = 0;
  std::vector<PieceHandle> buffer_;
  std::size_t rejected_ = 0;
};

// ---- queries ----

struct CrlQuery {
  std::uint32_t request_id = 0;
  std::uint32_t gamma_crl_index = 0;
  std::vector<std::uint16_t> missing;  // empty: any piece of the window
  vpki::Pseudonym signer;
  Signature signature;

  static CrlQuery make(std::uint32_t request_id, std::uint32_t gamma_crl_index, std::vector<std::uint16_t> missing,
                       vpki::Pseudonym signer, const KeyPair& key);
  Bytes signed_payload() const;
  Bytes encode() const;
  static CrlQuery decode(ByteView in);
  std::size_t encoded_size() const { return wire_size(missing.size(), signer.encoded_size()); }
  static std::size_t wire_size(std::size_t missing_count, std::size_t pseudonym_size) {
    return 10 + 2 * missing_count + pseudonym_size + kSignatureSize;
  }
  bool operator==(const CrlQuery&) const = default;
};

enum class QueryCheck { Ok, BadSignature, BadIssuer, NotValidNow, Revoked };

QueryCheck check_query(const CrlQuery& q, vpki::Timestamp now, const PublicKey& pca, const RevocationStore& store);

/// Sliding-window byte budget: at most `budget` bytes in any window of
/// `window_ms` milliseconds.
class RateLimiter {
 public:
  explicit RateLimiter(std::size_t budget_bytes, std::uint64_t window_ms = 1000)
      : budget_(budget_bytes), window_ms_(window_ms) {}

  bool can_send(std::uint64_t now_ms, std::size_t bytes) const;
  bool try_consume(std::uint64_t now_ms, std::size_t bytes);
  /// Earliest time at or after now when `bytes` would be admitted.
  std::uint64_t next_available_ms(std::uint64_t now_ms, std::size_t bytes) const;
  std::size_t used(std::uint64_t now_ms) const;
  std::size_t budget() const { return budget_; }

 private:
  void expire(std::uint64_t now_ms) const;

  std::size_t budget_;
  std::uint64_t window_ms_;
  mutable std::deque<std::pair<std::uint64_t, std::size_t>> log_;
  mutable std::size_t in_window_ = 0;
};

/// Uniformly random held piece among the requested ones (any held piece if
/// the request list is empty).
std::optional<std::uint16_t> choose_piece(const PieceLedger& ledger, std::span<const std::uint16_t> requested, Rng& rng);

struct QueryOutcome {
  QueryCheck check = QueryCheck::Ok;
  std::optional<PieceHandle> response;
};

QueryOutcome obu_handle_query(const CrlQuery& q, vpki::Timestamp now, std::uint64_t now_ms, const PublicKey& pca,
                              const RevocationStore& store, const PieceLedger& ledger, RateLimiter& limiter, Rng& rng);

/// Query retransmission interval: starts at `base_ms`, doubles per unanswered
/// query up to `max_ms`, back to base on any accepted piece.
class QueryBackoff {
 public:
  explicit QueryBackoff(std::uint64_t base_ms = 1000, std::uint64_t max_ms = 8000)
      : base_(base_ms), max_(max_ms), interval_(base_ms) {}
  std::uint64_t on_sent() {
    std::uint64_t now = interval_;
    interval_ = std::min(max_, interval_ * 2);
    return now;
  }
  void reset() { interval_ = base_; }
  std::uint64_t interval() const { return interval_; }

 private:
  std::uint64_t base_, max_, interval_;
};

// ---- RSU and beacons ----

/// Probability of announcing the next window's fingerprint at `now_ms`:
/// 0 until the final `fade_fraction` of the window, then linear to 1.
double next_fingerprint_weight(std::uint64_t now_ms, const vpki::TimeGrid& grid, double fade_fraction = 0.2);
std::uint32_t choose_fingerprint_window(std::uint64_t now_ms, const vpki::TimeGrid& grid, Rng& rng,
                                        double fade_fraction = 0.2);

struct BeaconPolicy {
  std::uint32_t alpha = 10;      // attach every alpha-th beacon in steady state
  std::uint32_t beta = 1;        // attach every beta-th beacon right after a switch
  double rate_hz = 10.0;
  double push_period_s = 1.0;    // how long the beta regime lasts after a switch

  bool attaches_pseudonym(std::uint64_t beacon_index_since_switch) const;
  /// Attachments over one pseudonym lifetime.
  double attachments_per_lifetime(double lifetime_s) const;
};

struct CamDescriptor {
  std::uint64_t beacon_index = 0;
  bool pseudonym_attached = false;
  bool carries_fingerprint = false;
  std::size_t security_bytes = 0;     // signature plus attached pseudonym
  std::size_t fingerprint_bytes = 0;  // share of the above due to an embedded fingerprint
};

/// Descriptor of the CAM with index `beacon_index_since_switch` under the
/// current pseudonym; nothing if no pseudonym is valid.
std::optional<CamDescriptor> beacon(std::uint64_t beacon_index_since_switch, const vpki::Pseudonym* current,
                                    vpki::Timestamp now, const BeaconPolicy& policy);

}  // namespace crlmesh::node
