#include <doctest.h>

#include <algorithm>
#include <map>

#include "crlmesh/node.hpp"
#include "crlmesh/selftest.hpp"
#include "support.hpp"

using namespace crlmesh;
using testsupport::Domain;

namespace {

Digest h_concat_bytes(std::initializer_list<ByteView> parts) {
  Bytes b;
  for (auto p : parts) b.insert(b.end(), p.begin(), p.end());
  return hash(b);
}

Bytes u32be(std::uint32_t v) { return {std::uint8_t(v >> 24), std::uint8_t(v >> 16), std::uint8_t(v >> 8), std::uint8_t(v)}; }

/// Recomputes a batch's serials straight from the recurrence.
std::vector<Digest> oracle_serials(const Digest& ik, const Digest& rnd, const std::vector<vpki::Pseudonym>& ps) {
  std::vector<Digest> out;
  Digest prev;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Digest seed_i = rnd;
    for (std::size_t j = 0; j <= i; ++j) seed_i = hash(seed_i.view());
    if (i == 0) {
      Digest rik = h_concat_bytes({ik.view(), ps[0].public_key.view(), u32be(ps[0].valid_from), u32be(ps[0].valid_to),
                                   seed_i.view()});
      prev = h_concat_bytes({rik.view(), seed_i.view()});
    } else {
      prev = h_concat_bytes({prev.view(), seed_i.view()});
    }
    out.push_back(prev);
  }
  return out;
}

vpki::TimeGrid grid(std::uint32_t tau, std::uint32_t gamma, std::uint32_t window) { return {tau, gamma, window}; }

}  // namespace

TEST_CASE("grid validation") {
  CHECK_NOTHROW(grid(60, 60, 3600).validate());
  CHECK_THROWS(grid(60, 90, 3600).validate());
  CHECK_THROWS(grid(60, 120, 3660).validate());
  CHECK_THROWS(grid(0, 60, 3600).validate());
  auto g = grid(300, 1800, 3600);
  CHECK(g.batch_size() == 6);
  CHECK(g.validity(2, 1) == std::pair<vpki::Timestamp, vpki::Timestamp>{3600, 3900});
  CHECK(g.validity(2, 6) == std::pair<vpki::Timestamp, vpki::Timestamp>{5100, 5400});
}

TEST_CASE("batch of one: SN_1 = H(RIK_1 || H(rnd))") {
  Domain d(grid(60, 60, 3600));
  auto resp = d.issue(1, 5);
  REQUIRE(resp.pseudonyms.size() == 1);
  const auto& p = resp.pseudonyms[0];
  Digest h1 = hash(resp.rnd_v.view());
  Digest rik = h_concat_bytes({Domain::ik(1).view(), p.public_key.view(), u32be(300), u32be(360), h1.view()});
  CHECK(p.rik == rik);
  CHECK(p.serial_number == h_concat_bytes({rik.view(), h1.view()}));
  CHECK(p.valid_from == 300);
  CHECK(p.valid_to == 360);
  CHECK(p.crl_version == 0);
  CHECK(p.verify_issuer(d.pca.public_key()));
}

TEST_CASE("thirty-minute interval with five-minute pseudonyms gives six per request") {
  Domain d(grid(300, 1800, 3600));
  auto resp = d.issue(1, 0);
  CHECK(resp.pseudonyms.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(resp.pseudonyms[i].valid_to - resp.pseudonyms[i].valid_from == 300);
}

TEST_CASE("batch of ten matches the loop oracle") {
  Domain d(grid(60, 600, 3600));
  auto resp = d.issue(9, 3);
  auto expect = oracle_serials(Domain::ik(9), resp.rnd_v, resp.pseudonyms);
  REQUIRE(expect.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(resp.pseudonyms[i].serial_number == expect[i]);
  const auto& rec = d.pca.records_for(Domain::ik(9)).at(0);
  CHECK(rec.serials == expect);
  CHECK(rec.first_sn == expect[0]);
  CHECK(rec.batch_size == 10);
  CHECK(rec.gamma_index == 0);
}

TEST_CASE("same slot, same validity for every requester") {
  Domain d(grid(60, 300, 3600));
  auto a = d.issue(1, 7);
  auto b = d.issue(2, 7);
  for (std::size_t i = 0; i < a.pseudonyms.size(); ++i) {
    CHECK(a.pseudonyms[i].valid_from == b.pseudonyms[i].valid_from);
    CHECK(a.pseudonyms[i].valid_to == b.pseudonyms[i].valid_to);
  }
  CHECK_FALSE(a.pseudonyms[0].serial_number == b.pseudonyms[0].serial_number);
}

TEST_CASE("issuance rejects bad tickets and failed proofs") {
  Domain d(grid(60, 120, 3600));
  auto keys = vpki::derive_pseudonym_keys(5, 2);

  auto t = d.ticket(1);
  t.valid_to += 1;  // signature no longer covers the fields
  CHECK_THROWS_AS(d.pca.issue_pseudonyms(vpki::make_request(t, 0, keys, false), 0), vpki::VpkiError);

  auto expired = d.ltca.issue_ticket(Domain::ik(1), 0, 100);
  CHECK_THROWS_AS(d.pca.issue_pseudonyms(vpki::make_request(expired, 1, keys, false), 100), vpki::VpkiError);

  auto req = vpki::make_request(d.ticket(1), 0, keys, false);
  req.proofs[1] = req.proofs[0];
  CHECK_THROWS_AS(d.pca.issue_pseudonyms(req, 0), vpki::VpkiError);

  auto short_req = vpki::make_request(d.ticket(1), 0, std::span(keys).first(1), false);
  CHECK_THROWS_AS(d.pca.issue_pseudonyms(short_req, 0), vpki::VpkiError);

  CHECK(d.pca.records_for(Domain::ik(1)).empty());
}

TEST_CASE("tampered pseudonym fails the issuer check") {
  Domain d(grid(60, 60, 3600));
  auto p = d.issue(1, 0).pseudonyms[0];
  CHECK(p.verify_issuer(d.pca.public_key()));
  p.valid_to += 60;
  CHECK_FALSE(p.verify_issuer(d.pca.public_key()));
}

TEST_CASE("carrier pseudonyms embed the window fingerprint") {
  Domain d(grid(60, 60, 3600));
  d.issue(1, 0);
  d.pca.revoke_vehicle(Domain::ik(1), 0);
  auto resp = d.issue(2, 1, true);
  REQUIRE(resp.pseudonyms[0].fingerprint.has_value());
  CHECK(*resp.pseudonyms[0].fingerprint == d.pca.published(0).fingerprint.filter);
  CHECK(resp.pseudonyms[0].verify_issuer(d.pca.public_key()));
  CHECK_FALSE(d.issue(3, 1, false).pseudonyms[0].fingerprint.has_value());
}

TEST_CASE("whole batch revoked before it starts") {
  Domain d(grid(300, 1800, 3600));
  auto resp = d.issue(4, 1);
  auto out = d.pca.revoke_vehicle(Domain::ik(4), 0);
  REQUIRE(out.size() == 1);
  CHECK(out[0].first == 0);
  CHECK(out[0].second.remaining == 5);
  auto derived = node::derive_serials(out[0].second);
  REQUIRE(derived.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(derived[i] == resp.pseudonyms[i].serial_number);
}

TEST_CASE("mid-batch revocation hides the earlier serials") {
  Domain d(grid(300, 1800, 3600));
  auto resp = d.issue(4, 0);
  // Third pseudonym is valid over [600, 900).
  auto out = d.pca.revoke_vehicle(Domain::ik(4), 650);
  REQUIRE(out.size() == 1);
  const auto& e = out[0].second;
  CHECK(e.anchor_sn == resp.pseudonyms[2].serial_number);
  CHECK(e.chain_seed == iterated_hash(resp.rnd_v, 3));
  CHECK(e.remaining == 3);
  auto derived = node::derive_serials(e);
  REQUIRE(derived.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(derived[i] == resp.pseudonyms[i + 2].serial_number);
  for (const auto& sn : derived) {
    CHECK_FALSE(sn == resp.pseudonyms[0].serial_number);
    CHECK_FALSE(sn == resp.pseudonyms[1].serial_number);
  }
  std::vector<Digest> published{e.anchor_sn, e.chain_seed};
  std::vector<Digest> hidden{resp.pseudonyms[0].serial_number, resp.pseudonyms[1].serial_number};
  CHECK_FALSE(selftest::closure_reaches(published, hidden, 3));
  // Sanity: the closure does reach a later serial from the same data.
  std::vector<Digest> later{resp.pseudonyms[3].serial_number};
  CHECK(selftest::closure_reaches(published, later, 2));
}

TEST_CASE("expired batches never reach the CRL") {
  Domain d(grid(60, 120, 3600));
  auto first = d.issue(1, 0);  // valid [0, 120)
  d.issue(1, 1);               // valid [120, 240), two pseudonyms
  auto out = d.pca.revoke_vehicle(Domain::ik(1), 150);
  REQUIRE(out.size() == 1);
  CHECK(out[0].second.remaining == 1);
  auto revoked = d.pca.revoked_serials(0);
  CHECK(revoked.size() == 2);
  for (const auto& p : first.pseudonyms)
    CHECK(std::find(revoked.begin(), revoked.end(), p.serial_number) == revoked.end());
}

TEST_CASE("revocation is idempotent and needs records") {
  Domain d(grid(60, 60, 3600));
  d.issue(1, 0);
  CHECK(d.pca.revoke_vehicle(Domain::ik(1), 0).size() == 1);
  CHECK(d.pca.revoke_vehicle(Domain::ik(1), 0).empty());
  CHECK(d.pca.entries_for(0).size() == 1);
  CHECK_THROWS_AS(d.pca.revoke_vehicle(Domain::ik(99), 0), vpki::VpkiError);
  CHECK_THROWS_AS(d.issue(1, 1), vpki::VpkiError);
}

TEST_CASE("three entries cover six in-window pseudonyms when batches hold two") {
  // tau = 1 min, issue interval = 2 min, CRL window = 6 min; 24 pseudonyms in 12 batches.
  Domain d(grid(60, 120, 360));
  for (std::uint32_t slot = 0; slot < 12; ++slot) d.issue(1, slot);
  auto out = d.pca.revoke_vehicle(Domain::ik(1), 0);
  CHECK(out.size() == 12);
  std::map<std::uint32_t, int> per_window;
  for (const auto& [w, e] : out) ++per_window[w];
  CHECK(per_window.size() == 4);
  for (const auto& [w, n] : per_window) CHECK(n == 3);
  CHECK(d.pca.revoked_serials(0).size() == 6);
}

TEST_CASE("one entry per batch and entry bytes constant in batch size") {
  for (std::uint32_t m : {1u, 2u, 5u, 10u}) {
    Domain d(grid(60, 60 * m, 600 * m));
    const int vehicles = 7;
    for (int v = 0; v < vehicles; ++v) d.issue(v, 0);
    for (int v = 0; v < vehicles; ++v) CHECK(d.pca.revoke_vehicle(Domain::ik(v), 0).size() == 1);
    auto pieces = d.pca.build_crl(0, 25'000);
    std::size_t entry_bytes = 0;
    for (const auto& p : pieces) entry_bytes += p.entries.size() * vpki::CrlEntry::kEncodedSize;
    CHECK(entry_bytes == 65u * vehicles);
    CHECK(d.pca.revoked_serials(0).size() == std::size_t{m} * vehicles);
  }
}

TEST_CASE("split_entries partitions into near-equal pieces under the budget") {
  std::vector<vpki::CrlEntry> entries(710);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(i));
    entries[i].anchor_sn = hash(w.bytes());
    entries[i].remaining = static_cast<std::uint8_t>(i % 7);
  }
  auto pieces = vpki::split_entries(3, entries, 10'000);
  // 710 * 65 = 46,150 bytes of entries -> 5 pieces of 142 entries each.
  CHECK(pieces.size() == 5);
  std::vector<vpki::CrlEntry> back;
  for (const auto& p : pieces) {
    CHECK(p.encoded_size() <= 10'000);
    CHECK(p.total_pieces == 5);
    CHECK(p.gamma_crl_index == 3);
    CHECK(p.entries.size() == 142);
    back.insert(back.end(), p.entries.begin(), p.entries.end());
  }
  CHECK(back == entries);

  entries.resize(1428);
  CHECK(vpki::split_entries(0, entries, 10'000).size() == 10);
  auto uneven = vpki::split_entries(0, std::span(entries).first(700), 10'000);
  std::size_t lo = 10'000, hi = 0;
  for (const auto& p : uneven) {
    lo = std::min(lo, p.entries.size());
    hi = std::max(hi, p.entries.size());
  }
  CHECK(hi - lo <= 1);
  CHECK(vpki::split_entries(0, {}, 10'000).empty());
  // Exactly one piece's worth of entry bytes still needs room for the header.
  CHECK(vpki::split_entries(0, std::span(entries).first(153), 9'945 + 13).size() == 1);
  CHECK(vpki::split_entries(0, std::span(entries).first(153), 9'945).size() == 2);
  CHECK_THROWS(vpki::split_entries(0, entries, 50));
}

TEST_CASE("fingerprint covers every piece and rejects mutations") {
  std::vector<vpki::CrlEntry> entries(1500);
  Rng rng(11);
  for (auto& e : entries)
    for (auto& b : e.anchor_sn.bytes) b = static_cast<std::uint8_t>(rng.next());
  Domain d(grid(60, 60, 3600));
  for (const auto& e : entries) d.pca.add_entry(0, e, std::span<const Digest>(&e.anchor_sn, 1));
  auto pieces = d.pca.build_crl(0, 10'000);
  REQUIRE(pieces.size() == 10);

  auto fp20 = d.pca.build_fingerprint(pieces, 1e-20);
  CHECK(fp20.filter.byte_size() == 120);
  CHECK(fp20.total_pieces == 10);
  CHECK(fp20.verify_issuer(d.pca.public_key()));
  for (const auto& p : pieces) CHECK(fp20.admits(p));

  auto fp = d.pca.build_fingerprint(pieces, 1e-30);
  std::size_t rejected = 0;
  const std::size_t trials = 10'000;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto& p = pieces[rng.below(pieces.size())];
    Bytes enc = p.encode();
    std::size_t at = vpki::CrlPiece::kHeaderSize + rng.below(enc.size() - vpki::CrlPiece::kHeaderSize);
    enc[at] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    if (!fp.admits(vpki::CrlPiece::decode(enc))) ++rejected;
  }
  CHECK(rejected == trials);
}

TEST_CASE("empty window still gets a signed one-bit fingerprint") {
  Domain d(grid(60, 60, 3600));
  const auto& pub = d.pca.published(5);
  CHECK(pub.pieces.empty());
  CHECK(pub.fingerprint.total_pieces == 0);
  CHECK(pub.fingerprint.filter.m_bits() == 1);
  CHECK(pub.fingerprint.gamma_crl_index == 5);
  CHECK(pub.fingerprint.verify_issuer(d.pca.public_key()));
}

TEST_CASE("published snapshot refreshes after new revocations") {
  Domain d(grid(60, 60, 3600));
  d.issue(1, 0);
  d.issue(2, 0);
  d.pca.revoke_vehicle(Domain::ik(1), 0);
  auto first = d.pca.published(0).fingerprint;
  d.pca.revoke_vehicle(Domain::ik(2), 0);
  auto second = d.pca.published(0).fingerprint;
  CHECK_FALSE(first.filter == second.filter);
  CHECK(d.pca.published(0).pieces.at(0).entries.size() == 2);
}
