#include "crlmesh/selftest.hpp"

#include <algorithm>
#include <cstring>
#include <unordered_set>

#include "crlmesh/bloom.hpp"
#include "crlmesh/node.hpp"
#include "crlmesh/vpki.hpp"

namespace crlmesh::selftest {

namespace {

struct DigestHash {
  std::size_t operator()(const Digest& d) const {
    std::size_t v;
    std::memcpy(&v, d.bytes.data(), sizeof v);
    return v;
  }
};

using DigestSet = std::unordered_set<Digest, DigestHash>;

}  // namespace

bool closure_reaches(std::span<const Digest> published, std::span<const Digest> forbidden, int depth) {
  DigestSet target(forbidden.begin(), forbidden.end());
  std::vector<Digest> layer(published.begin(), published.end());
  DigestSet seen(layer.begin(), layer.end());
  for (const auto& d : layer)
    if (target.contains(d)) return true;

  for (int round = 1; round <= depth; ++round) {
    const bool last = round == depth;
    std::vector<Digest> next;
    auto visit = [&](const Digest& d) {
      if (target.contains(d)) return true;
      if (!last && seen.insert(d).second) next.push_back(d);
      return false;
    };
    for (const auto& x : layer)
      if (visit(hash(x.view()))) return true;
    for (const auto& x : layer)
      for (const auto& y : layer)
        if (visit(hash_concat(x, y))) return true;
    if (last) break;
    layer.insert(layer.end(), next.begin(), next.end());
  }
  return false;
}

namespace {

vpki::Pca make_pca(const vpki::Ltca& ltca, vpki::TimeGrid grid, std::uint64_t seed) {
  return vpki::Pca(KeyPair::from_seed(seed * 7 + 1), ltca.public_key(), vpki::PcaConfig{grid, 25'000, 1e-30, 0.2},
                   seed);
}

Digest ik_of(std::uint64_t v) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(v >> 32));
  w.u32(static_cast<std::uint32_t>(v));
  return hash(w.bytes());
}

bool chain_oracle(std::uint64_t seed) {
  Rng rng(seed);
  vpki::Ltca ltca(KeyPair::from_seed(seed + 11));
  for (int c = 0; c < 60; ++c) {
    std::uint32_t batch = 1 + static_cast<std::uint32_t>(rng.below(12));
    vpki::TimeGrid grid{60, 60 * batch, 60 * batch * 4};
    auto pca = make_pca(ltca, grid, seed + c);
    auto keys = vpki::derive_pseudonym_keys(seed * 1000 + c, batch);
    auto ticket = ltca.issue_ticket(ik_of(c), 0, 1u << 30);
    auto resp = pca.issue_pseudonyms(vpki::make_request(ticket, 0, keys, false), 0);
    std::uint32_t k = 1 + static_cast<std::uint32_t>(rng.below(batch));
    auto out = pca.revoke_vehicle(ik_of(c), (k - 1) * 60 + 1);
    if (out.size() != 1) return false;
    auto derived = node::derive_serials(out[0].second);
    if (derived.size() != batch - k + 1) return false;
    for (std::size_t i = 0; i < derived.size(); ++i)
      if (!(derived[i] == resp.pseudonyms[k - 1 + i].serial_number)) return false;
  }
  return true;
}

bool bloom_no_false_negatives(std::uint64_t seed) {
  Rng rng(seed);
  for (int s = 0; s < 500; ++s) {
    std::size_t n = 1 + rng.below(40);
    auto f = bloom::BloomFilter::for_capacity(n, 1e-9);
    std::vector<Digest> xs(n);
    for (auto& x : xs) {
      for (auto& b : x.bytes) b = static_cast<std::uint8_t>(rng.next());
      f.insert(x);
    }
    for (const auto& x : xs)
      if (!f.contains(x)) return false;
  }
  return true;
}

bool wire_round_trips(std::uint64_t seed) {
  vpki::Ltca ltca(KeyPair::from_seed(seed + 3));
  auto pca = make_pca(ltca, vpki::TimeGrid{60, 120, 3600}, seed);
  for (int v = 0; v < 3; ++v) {
    auto keys = vpki::derive_pseudonym_keys(seed + v, 2);
    pca.issue_pseudonyms(vpki::make_request(ltca.issue_ticket(ik_of(v), 0, 1u << 30), 0, keys, false), 0);
    pca.revoke_vehicle(ik_of(v), 0);
  }
  const auto& pub = pca.published(0);
  if (pub.pieces.size() != 1) return false;
  const auto& piece = pub.pieces[0];
  Bytes enc = piece.encode();
  if (enc.size() != vpki::CrlPiece::kHeaderSize + 3 * vpki::CrlEntry::kEncodedSize) return false;
  if (vpki::CrlPiece::kHeaderSize != 13 || vpki::CrlEntry::kEncodedSize != 65) return false;
  if (!(vpki::CrlPiece::decode(enc) == piece)) return false;
  if (!(vpki::SignedFingerprint::decode(pub.fingerprint.encode()) == pub.fingerprint)) return false;

  auto keys = vpki::derive_pseudonym_keys(seed + 9, 2);
  auto resp = pca.issue_pseudonyms(
      vpki::make_request(ltca.issue_ticket(ik_of(9), 0, 1u << 30), 1, keys, true), 120);
  const auto& ps = resp.pseudonyms[0];
  if (!(vpki::Pseudonym::decode(ps.encode()) == ps)) return false;
  auto q = node::CrlQuery::make(7, 0, {0, 1}, ps, keys[0]);
  Bytes qe = q.encode();
  if (qe.size() != q.encoded_size()) return false;
  return node::CrlQuery::decode(qe) == q;
}

bool unlinkability(std::uint64_t seed) {
  vpki::Ltca ltca(KeyPair::from_seed(seed + 5));
  auto pca = make_pca(ltca, vpki::TimeGrid{60, 240, 480}, seed);
  auto keys = vpki::derive_pseudonym_keys(seed + 21, 4);
  auto resp =
      pca.issue_pseudonyms(vpki::make_request(ltca.issue_ticket(ik_of(1), 0, 1u << 30), 0, keys, false), 0);
  auto out = pca.revoke_vehicle(ik_of(1), 130);  // third pseudonym is current
  if (out.size() != 1) return false;
  std::vector<Digest> published{out[0].second.anchor_sn, out[0].second.chain_seed};
  std::vector<Digest> hidden{resp.pseudonyms[0].serial_number, resp.pseudonyms[1].serial_number};
  return !closure_reaches(published, hidden, 3);
}

}  // namespace

std::vector<SuiteResult> run_all(std::ostream& out, std::uint64_t seed) {
  std::vector<SuiteResult> results;
  auto run = [&](const char* name, bool (*fn)(std::uint64_t)) {
    bool ok = false;
    try {
      ok = fn(seed);
    } catch (const std::exception& e) {
      out << "  " << name << ": exception: " << e.what() << '\n';
    }
    out << (ok ? "PASS " : "FAIL ") << name << '\n';
    results.push_back({name, ok});
  };
  run("hash-chain oracle", chain_oracle);
  run("bloom no false negatives", bloom_no_false_negatives);
  run("wire round trips", wire_round_trips);
  run("unlinkability (depth 3)", unlinkability);
  return results;
}

}  // namespace crlmesh::selftest
