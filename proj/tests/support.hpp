#pragma once

#include "crlmesh/vpki.hpp"

namespace testsupport {

using namespace crlmesh;

/// LTCA + PCA pair over a given grid.
struct Domain {
  vpki::Ltca ltca{KeyPair::from_seed(1001)};
  vpki::Pca pca;

  explicit Domain(vpki::TimeGrid grid, std::size_t budget = 25'000, double fpr = 1e-30)
      : pca(KeyPair::from_seed(2002), ltca.public_key(), vpki::PcaConfig{grid, budget, fpr, 0.2}, 77) {}

  static Digest ik(std::uint64_t vehicle) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(vehicle));
    return hash(w.bytes());
  }

  vpki::Ticket ticket(std::uint64_t vehicle, vpki::Timestamp to = 1u << 30) const {
    return ltca.issue_ticket(ik(vehicle), 0, to);
  }

  /// Issues slot `slot` for `vehicle`; keys are derived from (vehicle, slot).
  vpki::IssuanceResponse issue(std::uint64_t vehicle, std::uint32_t slot, bool carrier = false) {
    auto keys = vpki::derive_pseudonym_keys(vehicle * 100'000 + slot, pca.config().grid.batch_size());
    return pca.issue_pseudonyms(vpki::make_request(ticket(vehicle), slot, keys, carrier),
                                slot * pca.config().grid.issue_interval_s);
  }
};

}  // namespace testsupport
