#pragma once

#include <cstdint>
#include <ostream>
#include <span>

namespace crlmesh::analysis {

/// Fingerprint bytes for n pieces: ceil(size_bits / 8).
std::uint64_t fingerprint_overhead(std::uint64_t n_pieces, double target_fpr);
/// Comparison scheme that ships one digest per piece.
std::uint64_t concat_overhead(std::uint64_t n_pieces, std::uint64_t digest_bytes);

/// Size of a CRL compressed into a Bloom filter: ceil(-N M ln p / (ln 2)^2 / 8).
std::uint64_t c2rl_size_bytes(std::uint64_t n_vehicles, std::uint64_t psnyms_per_window, double target_fpr);
/// One (SN, seed) pair of 256 bits each per revoked vehicle: 64 N.
std::uint64_t vc_size_bytes(std::uint64_t n_vehicles);
/// Same with the one-byte remaining counter of the wire entry: 65 N.
std::uint64_t vc_wire_size_bytes(std::uint64_t n_vehicles);
/// p at which the compressed CRL is as large as the per-vehicle one (independent of N).
double c2rl_break_even_fpr(std::uint64_t psnyms_per_window);

struct ForgingCost {
  std::uint32_t k_hashes = 0;
  double total_hashes = 0;
  std::uint64_t units_needed = 0;
  double single_pool_time_s = 0;
};

inline constexpr double kMinerHashrate = 14e12;            // H/s of one mining unit
inline constexpr double kPoolHashrate = 1'604'608e12;      // H/s of a large mining pool

/// Work to find a piece that passes a filter with rate p: K / p hash evaluations.
ForgingCost forging_cost(double target_fpr, double hashrate_per_unit = kMinerHashrate, double window_s = 3600,
                         double pool_hashrate = kPoolHashrate);

/// T * R / windows_per_day.
double effective_crl_entries(double total_psnyms, double revocation_rate, double windows_per_day);

// CSV tables for external plotting.
void write_fig2_table(std::ostream& out, std::span<const std::uint64_t> piece_counts, std::span<const double> fprs);
void write_fig4_table(std::ostream& out, std::uint64_t n_vehicles, std::span<const std::uint64_t> m_values,
                      std::span<const double> fprs);
void write_forge_table(std::ostream& out, std::span<const double> fprs, double hashrate_per_unit, double window_s,
                       double pool_hashrate);
void write_effective_table(std::ostream& out, std::span<const double> totals, double revocation_rate,
                           double windows_per_day);

}  // namespace crlmesh::analysis
