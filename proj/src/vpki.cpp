#include "crlmesh/vpki.hpp"

#include <algorithm>
#include <limits>

namespace crlmesh::vpki {

namespace {

const std::vector<CrlEntry> kNoEntries;
const std::vector<IssuanceRecord> kNoRecords;

void write_digest(ByteWriter& w, const Digest& d) { w.raw(d.bytes); }

}  // namespace

void TimeGrid::validate() const {
  if (pseudonym_lifetime_s == 0 || issue_interval_s == 0 || crl_window_s == 0)
    throw std::invalid_argument("time grid intervals must be positive");
  if (issue_interval_s % pseudonym_lifetime_s != 0)
    throw std::invalid_argument("issue interval must be a multiple of the pseudonym lifetime");
  if (crl_window_s % issue_interval_s != 0)
    throw std::invalid_argument("CRL window must be a multiple of the issue interval");
}

std::pair<Timestamp, Timestamp> TimeGrid::validity(std::uint32_t slot, std::uint32_t position) const {
  if (position == 0 || position > batch_size()) throw std::out_of_range("pseudonym position outside batch");
  Timestamp ts = slot * issue_interval_s + (position - 1) * pseudonym_lifetime_s;
  return {ts, ts + pseudonym_lifetime_s};
}

Bytes Ticket::signed_payload() const {
  ByteWriter w(kDigestSize + 8);
  write_digest(w, ik_tkt);
  w.u32(valid_from);
  w.u32(valid_to);
  return std::move(w).take();
}

Ticket Ltca::issue_ticket(const Digest& ik_tkt, Timestamp valid_from, Timestamp valid_to) const {
  if (valid_from >= valid_to) throw std::invalid_argument("ticket validity is empty");
  Ticket t{ik_tkt, valid_from, valid_to, {}};
  t.ltca_signature = key_.sign(t.signed_payload());
  return t;
}

// ---- Pseudonym ----

Bytes Pseudonym::signed_payload() const {
  ByteWriter w(encoded_size());
  write_digest(w, serial_number);
  w.raw(public_key.bytes);
  w.u32(crl_version);
  w.u32(valid_from);
  w.u32(valid_to);
  w.u8(fingerprint ? 1 : 0);
  if (fingerprint) fingerprint->serialize_into(w);
  write_digest(w, rik);
  return std::move(w).take();
}

void Pseudonym::encode_into(ByteWriter& w) const {
  w.raw(signed_payload());
  w.raw(pca_signature.bytes);
}

Bytes Pseudonym::encode() const {
  ByteWriter w(encoded_size());
  encode_into(w);
  return std::move(w).take();
}

std::size_t Pseudonym::encoded_size() const {
  std::size_t n = kDigestSize + kPublicKeySize + 12 + 1 + kDigestSize + kSignatureSize;
  if (fingerprint) n += fingerprint->serialized_size();
  return n;
}

Pseudonym Pseudonym::read_from(ByteReader& r) {
  Pseudonym p;
  r.copy_into(p.serial_number.bytes);
  r.copy_into(p.public_key.bytes);
  p.crl_version = r.u32();
  p.valid_from = r.u32();
  p.valid_to = r.u32();
  std::uint8_t carrier = r.u8();
  if (carrier > 1) throw DecodeError("pseudonym: bad carrier flag");
  if (carrier) p.fingerprint = bloom::BloomFilter::read_from(r);
  r.copy_into(p.rik.bytes);
  r.copy_into(p.pca_signature.bytes);
  return p;
}

Pseudonym Pseudonym::decode(ByteView in) {
  ByteReader r(in);
  Pseudonym p = read_from(r);
  r.expect_end("pseudonym");
  return p;
}

// ---- CRL entries and pieces ----

void CrlEntry::encode_into(ByteWriter& w) const {
  write_digest(w, anchor_sn);
  write_digest(w, chain_seed);
  w.u8(remaining);
}

CrlEntry CrlEntry::read_from(ByteReader& r) {
  CrlEntry e;
  r.copy_into(e.anchor_sn.bytes);
  r.copy_into(e.chain_seed.bytes);
  e.remaining = r.u8();
  return e;
}

Bytes CrlPiece::encode() const {
  ByteWriter w(encoded_size());
  w.u8(version);
  w.u32(gamma_crl_index);
  w.u16(piece_index);
  w.u16(total_pieces);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) e.encode_into(w);
  return std::move(w).take();
}

CrlPiece CrlPiece::decode(ByteView in) {
  ByteReader r(in);
  CrlPiece p;
  p.version = r.u8();
  if (p.version != kVersion) throw DecodeError("crl piece: unsupported version");
  p.gamma_crl_index = r.u32();
  p.piece_index = r.u16();
  p.total_pieces = r.u16();
  if (p.piece_index >= p.total_pieces) throw DecodeError("crl piece: index out of range");
  std::uint32_t count = r.u32();
  if (r.remaining() != static_cast<std::size_t>(count) * CrlEntry::kEncodedSize)
    throw DecodeError("crl piece: entry count does not match length");
  p.entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) p.entries.push_back(CrlEntry::read_from(r));
  return p;
}

// ---- fingerprint ----

Bytes SignedFingerprint::signed_payload() const {
  ByteWriter w(encoded_size());
  w.u32(gamma_crl_index);
  w.u16(total_pieces);
  filter.serialize_into(w);
  return std::move(w).take();
}

Bytes SignedFingerprint::encode() const {
  Bytes out = signed_payload();
  out.insert(out.end(), pca_signature.bytes.begin(), pca_signature.bytes.end());
  return out;
}

SignedFingerprint SignedFingerprint::decode(ByteView in) {
  ByteReader r(in);
  SignedFingerprint f;
  f.gamma_crl_index = r.u32();
  f.total_pieces = r.u16();
  f.filter = bloom::BloomFilter::read_from(r);
  r.copy_into(f.pca_signature.bytes);
  r.expect_end("fingerprint");
  return f;
}

bool SignedFingerprint::admits(const CrlPiece& piece) const {
  if (piece.gamma_crl_index != gamma_crl_index || piece.total_pieces != total_pieces) return false;
  return filter.contains(piece.digest());
}

// ---- issuance ----

Signature prove_possession(const KeyPair& key) { return key.sign(key.public_key().view()); }

std::vector<KeyPair> derive_pseudonym_keys(std::uint64_t seed, std::size_t count) {
  std::vector<KeyPair> keys;
  keys.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    ByteWriter w(12);
    w.u32(static_cast<std::uint32_t>(seed >> 32));
    w.u32(static_cast<std::uint32_t>(seed));
    w.u32(static_cast<std::uint32_t>(i));
    keys.push_back(KeyPair::from_seed(w.bytes()));
  }
  return keys;
}

IssuanceRequest make_request(const Ticket& ticket, std::uint32_t issue_slot, std::span<const KeyPair> keys,
                             bool carrier) {
  IssuanceRequest r;
  r.ticket = ticket;
  r.issue_slot = issue_slot;
  r.carrier = carrier;
  for (const auto& k : keys) {
    r.public_keys.push_back(k.public_key());
    r.proofs.push_back(prove_possession(k));
  }
  return r;
}

Digest revocation_identifiable_key(const Digest& ik_tkt, const PublicKey& key, Timestamp t_s, Timestamp t_e,
                                   const Digest& seed_at_position) {
  ByteWriter w(2 * kDigestSize + kPublicKeySize + 8);
  write_digest(w, ik_tkt);
  w.raw(key.bytes);
  w.u32(t_s);
  w.u32(t_e);
  write_digest(w, seed_at_position);
  return hash(w.bytes());
}

std::vector<Digest> chain_serials(const Digest& ik_tkt, const Digest& rnd_v, std::span<const PublicKey> keys,
                                  std::span<const std::pair<Timestamp, Timestamp>> validity,
                                  std::vector<Digest>* riks) {
  if (keys.size() != validity.size()) throw std::invalid_argument("chain_serials: keys and validity differ in length");
  std::vector<Digest> sns;
  sns.reserve(keys.size());
  if (riks) riks->clear();
  Digest seed = rnd_v;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    seed = hash(seed.view());  // H^{i+1}(rnd_v)
    Digest rik = revocation_identifiable_key(ik_tkt, keys[i], validity[i].first, validity[i].second, seed);
    if (riks) riks->push_back(rik);
    sns.push_back(i == 0 ? hash_concat(rik, seed) : hash_concat(sns.back(), seed));
  }
  return sns;
}

std::vector<CrlPiece> split_entries(std::uint32_t gamma_crl_index, std::span<const CrlEntry> entries,
                                    std::size_t byte_budget) {
  if (entries.empty()) return {};
  if (byte_budget < CrlPiece::kHeaderSize + CrlEntry::kEncodedSize)
    throw std::invalid_argument("piece budget too small for a single entry");
  const std::size_t total = entries.size() * CrlEntry::kEncodedSize;
  std::size_t n = (total + byte_budget - 1) / byte_budget;
  // Headers also count against the budget; add pieces until every one fits.
  const std::size_t per_piece = (byte_budget - CrlPiece::kHeaderSize) / CrlEntry::kEncodedSize;
  n = std::max(n, (entries.size() + per_piece - 1) / per_piece);
  if (n > std::numeric_limits<std::uint16_t>::max()) throw std::invalid_argument("too many CRL pieces");

  std::vector<CrlPiece> pieces(n);
  const std::size_t base = entries.size() / n;
  const std::size_t extra = entries.size() % n;
  std::size_t at = 0;
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t count = base + (j < extra ? 1 : 0);
    auto& p = pieces[j];
    p.gamma_crl_index = gamma_crl_index;
    p.piece_index = static_cast<std::uint16_t>(j);
    p.total_pieces = static_cast<std::uint16_t>(n);
    p.entries.assign(entries.begin() + static_cast<std::ptrdiff_t>(at),
                     entries.begin() + static_cast<std::ptrdiff_t>(at + count));
    at += count;
  }
  return pieces;
}

Pca::Pca(KeyPair key, PublicKey ltca_key, PcaConfig config, std::uint64_t seed)
    : key_(std::move(key)), ltca_key_(ltca_key), config_(config), rng_(seed) {
  config_.grid.validate();
}

bool Pca::draw_carrier() {
  return rng_.bernoulli(config_.carrier_probability);
}

IssuanceResponse Pca::issue_pseudonyms(const IssuanceRequest& request, Timestamp now) {
  const Ticket& t = request.ticket;
  if (!verify(ltca_key_, t.signed_payload(), t.ltca_signature)) throw VpkiError("ticket signature invalid");
  if (now < t.valid_from || now >= t.valid_to) throw VpkiError("ticket expired or not yet valid");
  if (revoked_at_.contains(t.ik_tkt)) throw VpkiError("ticket holder revoked");

  const auto& grid = config_.grid;
  const std::uint32_t n = grid.batch_size();
  if (request.public_keys.size() != n) throw VpkiError("request must carry one key per pseudonym in the batch");
  if (request.proofs.size() != n) throw VpkiError("missing proof of possession");
  for (std::size_t i = 0; i < n; ++i) {
    if (!verify(request.public_keys[i], request.public_keys[i].view(), request.proofs[i]))
      throw VpkiError("proof of possession failed");
  }

  IssuanceRecord rec;
  rec.ik_tkt = t.ik_tkt;
  for (std::size_t i = 0; i < kDigestSize; i += 8) {
    std::uint64_t v = rng_.next();
    for (int b = 0; b < 8; ++b) rec.rnd_v.bytes[i + b] = static_cast<std::uint8_t>(v >> (56 - 8 * b));
  }
  rec.batch_size = n;
  rec.issue_slot = request.issue_slot;

  std::vector<std::pair<Timestamp, Timestamp>> validity;
  validity.reserve(n);
  for (std::uint32_t i = 1; i <= n; ++i) validity.push_back(grid.validity(request.issue_slot, i));
  rec.gamma_index = grid.crl_window_of(validity.front().first);

  std::vector<Digest> riks;
  rec.serials = chain_serials(t.ik_tkt, rec.rnd_v, request.public_keys, validity, &riks);
  rec.first_sn = rec.serials.front();

  std::optional<bloom::BloomFilter> fp;
  if (request.carrier) fp = published(rec.gamma_index).fingerprint.filter;

  IssuanceResponse resp;
  resp.rnd_v = rec.rnd_v;
  resp.pseudonyms.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Pseudonym p;
    p.serial_number = rec.serials[i];
    p.public_key = request.public_keys[i];
    p.crl_version = rec.gamma_index;
    p.fingerprint = fp;
    p.rik = riks[i];
    p.valid_from = validity[i].first;
    p.valid_to = validity[i].second;
    p.pca_signature = key_.sign(p.signed_payload());
    resp.pseudonyms.push_back(std::move(p));
  }
  records_[t.ik_tkt].push_back(std::move(rec));
  return resp;
}

std::vector<std::pair<std::uint32_t, CrlEntry>> Pca::revoke_vehicle(const Digest& ik_tkt, Timestamp at_time) {
  auto it = records_.find(ik_tkt);
  if (it == records_.end()) throw VpkiError("no issuance records for this ticket key");
  if (revoked_at_.contains(ik_tkt)) return {};
  revoked_at_[ik_tkt] = at_time;

  std::vector<std::pair<std::uint32_t, CrlEntry>> out;
  const auto& grid = config_.grid;
  for (const auto& rec : it->second) {
    // First pseudonym whose validity has not ended; earlier ones stay unlinkable.
    std::uint32_t k = 0;
    for (std::uint32_t i = 1; i <= rec.batch_size; ++i) {
      if (grid.validity(rec.issue_slot, i).second > at_time) {
        k = i;
        break;
      }
    }
    if (k == 0) continue;
    CrlEntry e;
    e.anchor_sn = rec.serials[k - 1];
    e.chain_seed = iterated_hash(rec.rnd_v, k);
    e.remaining = static_cast<std::uint8_t>(rec.batch_size - k);
    add_entry(rec.gamma_index, e, std::span<const Digest>(rec.serials).subspan(k - 1));
    out.emplace_back(rec.gamma_index, e);
  }
  return out;
}

void Pca::add_entry(std::uint32_t gamma_crl_index, const CrlEntry& entry, std::span<const Digest> covered_serials) {
  registry_[gamma_crl_index].push_back(entry);
  auto& sns = revoked_serials_[gamma_crl_index];
  sns.insert(sns.end(), covered_serials.begin(), covered_serials.end());
  published_.erase(gamma_crl_index);
}

std::vector<CrlPiece> Pca::build_crl(std::uint32_t gamma_crl_index, std::size_t byte_budget) const {
  return split_entries(gamma_crl_index, entries_for(gamma_crl_index), byte_budget);
}

SignedFingerprint Pca::build_fingerprint(std::span<const CrlPiece> pieces, double target_fpr) const {
  if (pieces.empty()) throw std::invalid_argument("window index unknown for an empty piece list");
  return build_fingerprint(pieces.front().gamma_crl_index, pieces, target_fpr);
}

SignedFingerprint Pca::build_fingerprint(std::uint32_t gamma_crl_index, std::span<const CrlPiece> pieces,
                                         double target_fpr) const {
  SignedFingerprint f;
  f.gamma_crl_index = gamma_crl_index;
  f.total_pieces = static_cast<std::uint16_t>(pieces.size());
  if (pieces.empty()) {
    f.filter = bloom::BloomFilter(1, static_cast<std::uint16_t>(std::max<std::uint32_t>(1, bloom::optimal_k(target_fpr))));
  } else {
    f.filter = bloom::BloomFilter::for_capacity(pieces.size(), target_fpr);
    for (const auto& p : pieces) {
      if (p.gamma_crl_index != gamma_crl_index) throw std::invalid_argument("pieces span several windows");
      f.filter.insert(p.digest());
    }
  }
  f.pca_signature = key_.sign(f.signed_payload());
  return f;
}

const PublishedCrl& Pca::published(std::uint32_t gamma_crl_index) {
  auto it = published_.find(gamma_crl_index);
  if (it != published_.end()) return it->second;
  PublishedCrl crl;
  crl.pieces = build_crl(gamma_crl_index, config_.piece_budget_bytes);
  crl.fingerprint = build_fingerprint(gamma_crl_index, crl.pieces, config_.fingerprint_fpr);
  return published_.emplace(gamma_crl_index, std::move(crl)).first->second;
}

const std::vector<CrlEntry>& Pca::entries_for(std::uint32_t gamma_crl_index) const {
  auto it = registry_.find(gamma_crl_index);
  return it == registry_.end() ? kNoEntries : it->second;
}

const std::vector<IssuanceRecord>& Pca::records_for(const Digest& ik_tkt) const {
  auto it = records_.find(ik_tkt);
  return it == records_.end() ? kNoRecords : it->second;
}

std::vector<Digest> Pca::revoked_serials(std::uint32_t gamma_crl_index) const {
  auto it = revoked_serials_.find(gamma_crl_index);
  if (it == revoked_serials_.end()) return {};
  return it->second;
}

}  // namespace crlmesh::vpki
