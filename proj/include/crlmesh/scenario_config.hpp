#pragma once

#include <cstdint>
#include <istream>
#include <stdexcept>
#include <string>

#include "crlmesh/vpki.hpp"

namespace crlmesh::sim {

enum class Scheme { VehicleCentric, Baseline };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);  // throws ConfigError

/// Raised for a bad key or value; `key()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  Scheme scheme = Scheme::VehicleCentric;

  // area and population
  std::uint32_t grid_cols = 10;
  std::uint32_t grid_rows = 10;
  double cell_length_m = 400;
  std::uint32_t n_vehicles = 2000;
  std::uint32_t n_rsus = 20;
  double speed_min_mps = 10;
  double speed_max_mps = 15;
  double trip_mean_s = 690;
  std::string trace_file;  // optional; replaces the grid walker

  // radio
  double radio_range_m = 300;
  double bitrate_bps = 18e6;

  // time
  std::uint32_t sim_duration_s = 300;
  std::uint32_t start_time_s = 0;  // offset of the run into the day
  std::uint32_t checkpoint_s = 60;
  std::uint32_t warmup_s = 0;  // vehicles entering earlier are left out of p95_latency_s
  std::uint32_t pseudonym_lifetime_s = 60;
  std::uint32_t issue_interval_s = 300;
  std::uint32_t crl_window_s = 3600;

  // revocation
  double revocation_rate = 0.01;
  std::uint64_t total_pseudonyms_per_day = 1'712'782;
  double fingerprint_fpr = 1e-30;

  // distribution
  std::uint32_t bandwidth_bytes_per_s = 25'000;
  bool inbound_limit = true;
  double fingerprint_tx_s = 5;
  double piece_tx_s = 0.5;
  double fake_piece_tx_s = 0.5;
  double query_timeout_s = 1;
  double query_backoff_max_s = 8;
  double carrier_fraction = 0.2;
  double attacker_fraction = 0;

  // beaconing
  std::uint32_t beacon_hz = 10;
  std::uint32_t alpha = 10;
  std::uint32_t beta = 1;

  // modelled crypto costs
  double sign_ms = 0.51;
  double verify_ms = 0.39;
  double bf_test_ms = 0.12;

  vpki::TimeGrid grid() const { return {pseudonym_lifetime_s, issue_interval_s, crl_window_s}; }
  std::uint32_t windows_per_day() const { return 86'400 / crl_window_s; }

  /// Throws ConfigError naming the first bad key.
  void validate() const;
  /// Canonical key=value text; parse(serialize()) reproduces the config.
  std::string serialize() const;
  /// First 16 hex digits of SHA-256 over serialize() with the seed left out.
  std::string hash() const;

  /// Applies `key = value` lines on top of the defaults. Blank lines and
  /// lines starting with '#' are skipped. Unknown keys are errors.
  static ScenarioConfig parse(std::istream& in);
  static ScenarioConfig load(const std::string& path);
  void set(const std::string& key, const std::string& value);
};

}  // namespace crlmesh::sim
