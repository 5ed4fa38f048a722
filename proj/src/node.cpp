#include "crlmesh/node.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace crlmesh::node {

std::vector<Digest> derive_serials(const vpki::CrlEntry& entry) {
  std::vector<Digest> out;
  out.reserve(std::size_t{entry.remaining} + 1);
  Digest sn = entry.anchor_sn;
  Digest seed = entry.chain_seed;
  out.push_back(sn);
  for (unsigned i = 0; i < entry.remaining; ++i) {
    seed = hash(seed.view());
    sn = hash_concat(sn, seed);
    out.push_back(sn);
  }
  return out;
}

std::vector<Digest> parse_entries(std::span<const vpki::CrlPiece> pieces) {
  std::vector<Digest> out;
  for (const auto& p : pieces)
    for (const auto& e : p.entries) {
      auto sns = derive_serials(e);
      out.insert(out.end(), sns.begin(), sns.end());
    }
  return out;
}

// ---- RevocationStore ----

void RevocationStore::add(std::uint32_t gamma_crl_index, std::span<const Digest> serials) {
  auto& v = windows_[gamma_crl_index];
  v.insert(v.end(), serials.begin(), serials.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

std::size_t RevocationStore::add_pieces(std::uint32_t gamma_crl_index, std::span<const vpki::CrlPiece> pieces) {
  std::size_t before = size(gamma_crl_index);
  auto sns = parse_entries(pieces);
  add(gamma_crl_index, sns);
  return size(gamma_crl_index) - before;
}

bool RevocationStore::contains(std::uint32_t gamma_crl_index, const Digest& sn) const {
  comparisons_ = 0;
  auto it = windows_.find(gamma_crl_index);
  if (it == windows_.end()) return false;
  // Hand-rolled lower_bound so the comparison count is observable.
  const auto& v = it->second;
  std::size_t lo = 0, hi = v.size();
  while (lo < hi) {
    std::size_t mid = lo + (hi - lo) / 2;
    ++comparisons_;
    if (v[mid] < sn)
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo == v.size()) return false;
  ++comparisons_;
  return v[lo] == sn;
}

bool RevocationStore::contains(const Digest& sn) const {
  std::size_t total = 0;
  bool found = false;
  for (const auto& [gamma, v] : windows_) {
    found = contains(gamma, sn);
    total += comparisons_;
    if (found) break;
  }
  comparisons_ = total;
  return found;
}

std::size_t RevocationStore::size() const {
  std::size_t n = 0;
  for (const auto& [gamma, v] : windows_) n += v.size();
  return n;
}

std::size_t RevocationStore::size(std::uint32_t gamma_crl_index) const {
  auto it = windows_.find(gamma_crl_index);
  return it == windows_.end() ? 0 : it->second.size();
}

void RevocationStore::evict_before(std::uint32_t gamma_crl_index) {
  windows_.erase(windows_.begin(), windows_.lower_bound(gamma_crl_index));
}

// ---- PieceHandle / PieceLedger ----

PieceHandle PieceHandle::make(std::shared_ptr<const vpki::CrlPiece> piece, std::size_t signature_bytes,
                              bool signature_valid) {
  PieceHandle h;
  h.digest = piece->digest();
  h.wire_size = piece->encoded_size() + signature_bytes;
  h.signature_valid = signature_valid;
  h.piece = std::move(piece);
  return h;
}

PieceLedger::PieceLedger(std::uint32_t gamma_crl_index, Mode mode) : gamma_(gamma_crl_index), mode_(mode) {}

std::size_t PieceLedger::install_fingerprint(std::shared_ptr<const vpki::SignedFingerprint> fp) {
  if (mode_ != Mode::Fingerprint) throw std::logic_error("fingerprint installed on a signed-mode ledger");
  if (!fp || fp->gamma_crl_index != gamma_) throw std::invalid_argument("fingerprint belongs to another window");
  if (fingerprint_) return 0;
  fingerprint_ = std::move(fp);
  total_ = fingerprint_->total_pieces;
  pieces_.resize(*total_);
  std::size_t accepted = 0;
  auto pending = std::move(buffer_);
  buffer_.clear();
  for (const auto& h : pending)
    if (offer(h) == Verdict::Accepted) ++accepted;
  return accepted;
}

void PieceLedger::set_total(std::uint16_t total) {
  if (mode_ != Mode::Signed) throw std::logic_error("piece count of a fingerprint ledger comes from its fingerprint");
  if (total_) return;
  total_ = total;
  pieces_.resize(total);
}

bool PieceLedger::wants(std::uint32_t gamma, std::uint16_t index, std::uint16_t total) const {
  if (gamma != gamma_) return false;
  if (!total_) return index < total;
  return total == *total_ && index < total && !has(index);
}

bool PieceLedger::authentic(const PieceHandle& h) const {
  if (mode_ == Mode::Signed) return h.signature_valid;
  return fingerprint_->filter.contains(h.digest);
}

Verdict PieceLedger::store(const PieceHandle& h) {
  if (has(h.index())) return Verdict::Duplicate;
  if (!authentic(h)) {
    ++rejected_;
    return Verdict::Rejected;
  }
  pieces_[h.index()] = h;
  ++held_;
  return Verdict::Accepted;
}

Verdict PieceLedger::offer(const PieceHandle& h) {
  if (h.gamma() != gamma_ || h.index() >= h.total()) return Verdict::Mismatch;
  if (total_ && h.total() != *total_) return Verdict::Mismatch;

  if (mode_ == Mode::Signed) {
    if (!h.signature_valid) {
      ++rejected_;
      return Verdict::Rejected;
    }
    if (!total_) set_total(h.total());
    return store(h);
  }
  if (!fingerprint_) {
    std::size_t cap = std::min<std::size_t>(2 * std::size_t{h.total()}, kBufferHardCap);
    if (buffer_.size() >= cap) return Verdict::BufferFull;
    buffer_.push_back(h);
    return Verdict::Buffered;
  }
  return store(h);
}

std::vector<std::uint16_t> PieceLedger::missing() const {
  std::vector<std::uint16_t> out;
  for (std::size_t i = 0; i < total(); ++i)
    if (!pieces_[i].piece) out.push_back(static_cast<std::uint16_t>(i));
  return out;
}

std::vector<std::uint16_t> PieceLedger::held_indexes() const {
  std::vector<std::uint16_t> out;
  for (std::size_t i = 0; i < pieces_.size(); ++i)
    if (pieces_[i].piece) out.push_back(static_cast<std::uint16_t>(i));
  return out;
}

std::vector<vpki::CrlPiece> PieceLedger::pieces() const {
  std::vector<vpki::CrlPiece> out;
  for (const auto& h : pieces_)
    if (h.piece) out.push_back(*h.piece);
  return out;
}

// ---- CrlQuery ----

Bytes CrlQuery::signed_payload() const {
  ByteWriter w(encoded_size());
  w.u32(request_id);
  w.u32(gamma_crl_index);
  w.u16(static_cast<std::uint16_t>(missing.size()));
  for (auto i : missing) w.u16(i);
  signer.encode_into(w);
  return std::move(w).take();
}

Bytes CrlQuery::encode() const {
  Bytes out = signed_payload();
  out.insert(out.end(), signature.bytes.begin(), signature.bytes.end());
  return out;
}

CrlQuery CrlQuery::make(std::uint32_t request_id, std::uint32_t gamma_crl_index, std::vector<std::uint16_t> missing,
                        vpki::Pseudonym signer, const KeyPair& key) {
  if (missing.size() > std::numeric_limits<std::uint16_t>::max()) throw std::invalid_argument("too many indexes");
  CrlQuery q{request_id, gamma_crl_index, std::move(missing), std::move(signer), {}};
  q.signature = key.sign(q.signed_payload());
  return q;
}

CrlQuery CrlQuery::decode(ByteView in) {
  ByteReader r(in);
  CrlQuery q;
  q.request_id = r.u32();
  q.gamma_crl_index = r.u32();
  std::uint16_t n = r.u16();
  q.missing.reserve(n);
  for (std::uint16_t i = 0; i < n; ++i) q.missing.push_back(r.u16());
  q.signer = vpki::Pseudonym::read_from(r);
  r.copy_into(q.signature.bytes);
  r.expect_end("crl query");
  return q;
}

QueryCheck check_query(const CrlQuery& q, vpki::Timestamp now, const PublicKey& pca, const RevocationStore& store) {
  if (!q.signer.verify_issuer(pca)) return QueryCheck::BadIssuer;
  if (!q.signer.valid_at(now)) return QueryCheck::NotValidNow;
  if (store.contains(q.signer.serial_number)) return QueryCheck::Revoked;
  if (!verify(q.signer.public_key, q.signed_payload(), q.signature)) return QueryCheck::BadSignature;
  return QueryCheck::Ok;
}

// ---- RateLimiter ----

void RateLimiter::expire(std::uint64_t now_ms) const {
  while (!log_.empty() && log_.front().first + window_ms_ <= now_ms) {
    in_window_ -= log_.front().second;
    log_.pop_front();
  }
}

bool RateLimiter::can_send(std::uint64_t now_ms, std::size_t bytes) const {
  expire(now_ms);
  return in_window_ + bytes <= budget_;
}

bool RateLimiter::try_consume(std::uint64_t now_ms, std::size_t bytes) {
  if (!can_send(now_ms, bytes)) return false;
  log_.emplace_back(now_ms, bytes);
  in_window_ += bytes;
  return true;
}

std::uint64_t RateLimiter::next_available_ms(std::uint64_t now_ms, std::size_t bytes) const {
  if (bytes > budget_) return std::numeric_limits<std::uint64_t>::max();
  if (can_send(now_ms, bytes)) return now_ms;
  std::size_t left = in_window_;
  for (const auto& [t, b] : log_) {
    left -= b;
    if (left + bytes <= budget_) return t + window_ms_;
  }
  return now_ms;  // unreachable: an empty window always admits
}

std::size_t RateLimiter::used(std::uint64_t now_ms) const {
  expire(now_ms);
  return in_window_;
}

// ---- publishing ----

std::optional<std::uint16_t> choose_piece(const PieceLedger& ledger, std::span<const std::uint16_t> requested,
                                          Rng& rng) {
  std::vector<std::uint16_t> candidates;
  if (requested.empty()) {
    candidates = ledger.held_indexes();
  } else {
    for (auto i : requested)
      if (ledger.has(i)) candidates.push_back(i);
  }
  if (candidates.empty()) return std::nullopt;
  return candidates[rng.below(candidates.size())];
}

QueryOutcome obu_handle_query(const CrlQuery& q, vpki::Timestamp now, std::uint64_t now_ms, const PublicKey& pca,
                              const RevocationStore& store, const PieceLedger& ledger, RateLimiter& limiter, Rng& rng) {
  QueryOutcome out;
  out.check = check_query(q, now, pca, store);
  if (out.check != QueryCheck::Ok) return out;
  if (q.gamma_crl_index != ledger.gamma()) return out;
  auto idx = choose_piece(ledger, q.missing, rng);
  if (!idx) return out;
  const PieceHandle* h = ledger.piece(*idx);
  if (limiter.try_consume(now_ms, h->wire_size)) out.response = *h;
  return out;
}

// ---- RSU schedule and beacons ----

double next_fingerprint_weight(std::uint64_t now_ms, const vpki::TimeGrid& grid, double fade_fraction) {
  const std::uint64_t window_ms = std::uint64_t{grid.crl_window_s} * 1000;
  double pos = static_cast<double>(now_ms % window_ms) / static_cast<double>(window_ms);
  double start = 1.0 - fade_fraction;
  if (pos < start) return 0.0;
  return std::min(1.0, (pos - start) / fade_fraction);
}

std::uint32_t choose_fingerprint_window(std::uint64_t now_ms, const vpki::TimeGrid& grid, Rng& rng,
                                        double fade_fraction) {
  auto current = static_cast<std::uint32_t>(now_ms / (std::uint64_t{grid.crl_window_s} * 1000));
  return rng.bernoulli(next_fingerprint_weight(now_ms, grid, fade_fraction)) ? current + 1 : current;
}

bool BeaconPolicy::attaches_pseudonym(std::uint64_t beacon_index_since_switch) const {
  const auto push_beacons = static_cast<std::uint64_t>(push_period_s * rate_hz);
  if (beacon_index_since_switch < push_beacons) return beacon_index_since_switch % beta == 0;
  return beacon_index_since_switch % alpha == 0;
}

double BeaconPolicy::attachments_per_lifetime(double lifetime_s) const {
  auto beacons = static_cast<std::uint64_t>(lifetime_s * rate_hz);
  std::uint64_t n = 0;
  for (std::uint64_t i = 0; i < beacons; ++i) n += attaches_pseudonym(i) ? 1 : 0;
  return static_cast<double>(n);
}

std::optional<CamDescriptor> beacon(std::uint64_t beacon_index_since_switch, const vpki::Pseudonym* current,
                                    vpki::Timestamp now, const BeaconPolicy& policy) {
  if (!current || !current->valid_at(now)) return std::nullopt;
  CamDescriptor d;
  d.beacon_index = beacon_index_since_switch;
  d.pseudonym_attached = policy.attaches_pseudonym(beacon_index_since_switch);
  d.security_bytes = kWireSignatureOverhead;
  if (d.pseudonym_attached) {
    d.security_bytes += current->encoded_size();
    if (current->fingerprint) {
      d.carries_fingerprint = true;
      d.fingerprint_bytes = current->fingerprint->byte_size();  // filter bits only; header sits in security_bytes
    }
  }
  return d;
}

}  // namespace crlmesh::node
