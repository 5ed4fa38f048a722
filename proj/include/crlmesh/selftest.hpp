#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "crlmesh/crypto.hpp"

namespace crlmesh::selftest {

/// Closes `published` under H(x) and H(x || y) for `depth` rounds and reports
/// whether any digest of `forbidden` shows up. The last round is not stored,
/// only probed, so depth 4 over two seeds stays within memory.
bool closure_reaches(std::span<const Digest> published, std::span<const Digest> forbidden, int depth);

struct SuiteResult {
  const char* name;
  bool passed;
};

/// Hash-chain oracle, Bloom no-false-negative, wire round trips and the
/// small-instance unlinkability check. Prints one line per suite.
std::vector<SuiteResult> run_all(std::ostream& out, std::uint64_t seed = 1);

}  // namespace crlmesh::selftest
