#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "crlmesh/simulator.hpp"

namespace crlmesh::sim {

/// Writes latency.csv, cognizant.csv, overhead.csv, events.csv, bandwidth.csv
/// and summary.txt into `dir` (created if missing). Every CSV starts with a
/// comment line holding the config hash and seed, then a header row.
void write_outputs(const SimResult& r, const std::filesystem::path& dir);

struct BandwidthViolation {
  std::uint64_t node;
  std::uint32_t second;
  std::uint32_t bytes;
};

/// First (node, second) whose logged CRL bytes exceed the budget, if any.
std::optional<BandwidthViolation> audit_bandwidth(const SimResult& r);

std::string summary_text(const SimResult& r);

}  // namespace crlmesh::sim
