#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crlmesh/scenario_config.hpp"

namespace crlmesh::sim {

struct VehicleRecord {
  std::uint64_t id = 0;
  double enter_s = 0;
  std::optional<double> complete_s;
  std::optional<double> depart_s;
};

struct CognizantSample {
  std::uint32_t t_s = 0;
  std::uint32_t cognizant = 0;
  std::uint32_t present = 0;
};

struct OverheadWindow {
  std::uint32_t window_start_s = 0;
  std::uint64_t bytes_signatures = 0;
  std::uint64_t bytes_fingerprints = 0;
};

/// CRL bytes one honest node put on the air during one simulated second.
struct TxSecond {
  std::uint64_t node = 0;
  std::uint32_t second = 0;
  std::uint32_t bytes = 0;
};

/// Node ids at or above this value are RSUs.
inline constexpr std::uint64_t kRsuIdBase = 1ull << 40;

struct SimResult {
  ScenarioConfig config;
  std::uint32_t pieces_per_crl = 0;  // for the window (or day) current at start
  std::vector<VehicleRecord> vehicles;  // honest vehicles only
  std::vector<CognizantSample> cognizant;
  std::vector<OverheadWindow> overhead;
  std::map<std::string, std::uint64_t> counters;
  std::vector<TxSecond> crl_tx;

  /// Nearest-rank 95th percentile over completed vehicles that entered at or
  /// after config.warmup_s; nullopt if none did.
  std::optional<double> p95_latency_s() const;
  /// Same, over every completed vehicle.
  std::optional<double> p95_latency_all_s() const;
  double completed_fraction() const;
  /// Cognizant share of present honest vehicles at `t_s`.
  double cognizant_fraction_at(std::uint32_t t_s) const;
  std::uint64_t total_overhead_bytes() const;
};

/// Runs one scenario. Identical configs give identical results.
SimResult run(const ScenarioConfig& config);

}  // namespace crlmesh::sim
