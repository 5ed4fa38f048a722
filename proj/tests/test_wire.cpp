#include <doctest.h>

#include <fstream>
#include <string>

#include "wire_fixtures.hpp"

using namespace crlmesh;

namespace {

Bytes golden(const std::string& name) {
  std::ifstream in(std::string(CRLMESH_GOLDEN_DIR) + "/" + name + ".hex");
  REQUIRE_MESSAGE(in, "missing golden vector " << name);
  std::string hex;
  in >> hex;
  return from_hex(hex);
}

}  // namespace

TEST_CASE("crl piece matches its golden encoding") {
  auto want = golden("piece");
  CHECK(wirefixtures::piece().encode() == want);
  auto back = vpki::CrlPiece::decode(want);
  CHECK(back == wirefixtures::piece());
  CHECK(back.encode() == want);
  CHECK(want.size() == vpki::CrlPiece::kHeaderSize + 3 * vpki::CrlEntry::kEncodedSize);
}

TEST_CASE("signed fingerprint matches its golden encoding") {
  auto want = golden("fingerprint");
  auto f = wirefixtures::fingerprint();
  CHECK(f.encode() == want);
  auto back = vpki::SignedFingerprint::decode(want);
  CHECK(back == f);
  CHECK(back.encode() == want);
  CHECK(back.verify_issuer(KeyPair::from_seed(2002).public_key()));
  CHECK(want.size() == f.encoded_size());
}

TEST_CASE("pseudonyms match their golden encodings") {
  for (const char* name : {"pseudonym", "pseudonym_carrier"}) {
    CAPTURE(name);
    auto want = golden(name);
    auto p = std::string(name) == "pseudonym" ? wirefixtures::pseudonym() : wirefixtures::carrier_pseudonym();
    CHECK(p.encode() == want);
    auto back = vpki::Pseudonym::decode(want);
    CHECK(back == p);
    CHECK(back.encode() == want);
    CHECK(want.size() == p.encoded_size());
  }
  CHECK(wirefixtures::carrier_pseudonym().fingerprint.has_value());
  CHECK_FALSE(wirefixtures::pseudonym().fingerprint.has_value());
}

TEST_CASE("crl query matches its golden encoding") {
  auto want = golden("query");
  auto q = wirefixtures::query();
  CHECK(q.encode() == want);
  auto back = node::CrlQuery::decode(want);
  CHECK(back == q);
  CHECK(back.encode() == want);
  CHECK(want.size() == q.encoded_size());
}

TEST_CASE("truncated encodings are rejected") {
  for (const char* name : {"piece", "fingerprint", "pseudonym", "query"}) {
    CAPTURE(name);
    auto b = golden(name);
    b.pop_back();
    std::string n = name;
    if (n == "piece") CHECK_THROWS(vpki::CrlPiece::decode(b));
    if (n == "fingerprint") CHECK_THROWS(vpki::SignedFingerprint::decode(b));
    if (n == "pseudonym") CHECK_THROWS(vpki::Pseudonym::decode(b));
    if (n == "query") CHECK_THROWS(node::CrlQuery::decode(b));
  }
}
