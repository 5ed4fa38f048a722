#pragma once

// Fixed objects behind the golden wire vectors. Keys are seeded and ECDSA
// nonces are deterministic, so every run encodes the same bytes.

#include <map>
#include <string>

#include "crlmesh/node.hpp"
#include "support.hpp"

namespace wirefixtures {

using namespace crlmesh;

inline vpki::CrlPiece piece() {
  vpki::CrlPiece p;
  p.gamma_crl_index = 17;
  p.piece_index = 2;
  p.total_pieces = 5;
  for (std::uint8_t i = 0; i < 3; ++i) {
    vpki::CrlEntry e;
    e.anchor_sn = hash(Bytes{i, 0xA1});
    e.chain_seed = hash(Bytes{i, 0xB2});
    e.remaining = static_cast<std::uint8_t>(4 + i);
    p.entries.push_back(e);
  }
  return p;
}

inline vpki::SignedFingerprint fingerprint() {
  vpki::SignedFingerprint f;
  f.gamma_crl_index = 17;
  f.total_pieces = 5;
  f.filter = bloom::BloomFilter::for_capacity(5, 1e-6);
  auto p = piece();
  for (std::uint16_t i = 0; i < 5; ++i) {
    p.piece_index = i;
    f.filter.insert(p.digest());
  }
  f.pca_signature = KeyPair::from_seed(2002).sign(f.signed_payload());
  return f;
}

inline vpki::Pseudonym pseudonym() {
  testsupport::Domain d(vpki::TimeGrid{60, 300, 3600});
  return d.issue(7, 3).pseudonyms.at(1);
}

/// Carrier pseudonym: embeds the fingerprint of its CRL window.
inline vpki::Pseudonym carrier_pseudonym() {
  testsupport::Domain d(vpki::TimeGrid{60, 300, 3600});
  d.issue(5, 0);
  d.pca.revoke_vehicle(testsupport::Domain::ik(5), 10);
  return d.issue(9, 0, true).pseudonyms.at(0);
}

inline node::CrlQuery query() {
  auto ps = pseudonym();
  auto keys = vpki::derive_pseudonym_keys(7 * 100'000 + 3, 5);
  return node::CrlQuery::make(0x01020304, 17, {0, 3, 4}, ps, keys.at(1));
}

/// name -> canonical encoding
inline std::map<std::string, Bytes> all() {
  return {{"piece", piece().encode()},
          {"fingerprint", fingerprint().encode()},
          {"pseudonym", pseudonym().encode()},
          {"pseudonym_carrier", carrier_pseudonym().encode()},
          {"query", query().encode()}};
}

}  // namespace wirefixtures
