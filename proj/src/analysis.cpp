#include "crlmesh/analysis.hpp"

#include <cmath>
#include <iomanip>
#include <stdexcept>

#include "crlmesh/bloom.hpp"

namespace crlmesh::analysis {

std::uint64_t fingerprint_overhead(std::uint64_t n_pieces, double target_fpr) {
  if (n_pieces == 0) throw std::invalid_argument("fingerprint_overhead: need at least one piece");
  return (bloom::size_bits(n_pieces, target_fpr) + 7) / 8;
}

std::uint64_t concat_overhead(std::uint64_t n_pieces, std::uint64_t digest_bytes) {
  if (n_pieces == 0 || digest_bytes == 0) throw std::invalid_argument("concat_overhead: positive inputs required");
  return n_pieces * digest_bytes;
}

std::uint64_t c2rl_size_bytes(std::uint64_t n_vehicles, std::uint64_t psnyms_per_window, double target_fpr) {
  if (n_vehicles == 0 || psnyms_per_window == 0) throw std::invalid_argument("c2rl_size_bytes: N and M must be >= 1");
  return (bloom::size_bits(n_vehicles * psnyms_per_window, target_fpr) + 7) / 8;
}

std::uint64_t vc_size_bytes(std::uint64_t n_vehicles) { return 64 * n_vehicles; }
std::uint64_t vc_wire_size_bytes(std::uint64_t n_vehicles) { return 65 * n_vehicles; }

double c2rl_break_even_fpr(std::uint64_t psnyms_per_window) {
  if (psnyms_per_window == 0) throw std::invalid_argument("M must be >= 1");
  // -M ln p / (ln 2)^2 bits per vehicle == 512 bits per vehicle
  const double ln2 = std::log(2.0);
  return std::exp(-512.0 * ln2 * ln2 / static_cast<double>(psnyms_per_window));
}

ForgingCost forging_cost(double target_fpr, double hashrate_per_unit, double window_s, double pool_hashrate) {
  if (!(target_fpr > 0 && target_fpr < 1)) throw std::invalid_argument("forging_cost: p must lie in (0, 1)");
  if (!(hashrate_per_unit > 0 && window_s > 0 && pool_hashrate > 0))
    throw std::invalid_argument("forging_cost: rates and window must be positive");
  ForgingCost c;
  c.k_hashes = bloom::optimal_k(target_fpr);
  if (c.k_hashes == 0) throw std::invalid_argument("forging_cost: p too large for a useful filter");
  c.total_hashes = static_cast<double>(c.k_hashes) / target_fpr;
  c.units_needed = static_cast<std::uint64_t>(std::ceil(c.total_hashes / (hashrate_per_unit * window_s)));
  c.single_pool_time_s = c.total_hashes / pool_hashrate;
  return c;
}

double effective_crl_entries(double total_psnyms, double revocation_rate, double windows_per_day) {
  if (total_psnyms < 0 || revocation_rate < 0 || windows_per_day <= 0)
    throw std::invalid_argument("effective_crl_entries: bad input");
  return total_psnyms * revocation_rate / windows_per_day;
}

void write_fig2_table(std::ostream& out, std::span<const std::uint64_t> piece_counts, std::span<const double> fprs) {
  out << "n_pieces,fpr,k_hashes,bloom_bytes,sha1_concat_bytes,sha256_concat_bytes\n";
  for (auto n : piece_counts)
    for (double p : fprs)
      out << n << ',' << std::setprecision(3) << p << ',' << bloom::optimal_k(p) << ',' << fingerprint_overhead(n, p)
          << ',' << concat_overhead(n, 20) << ',' << concat_overhead(n, 32) << '\n';
}

void write_fig4_table(std::ostream& out, std::uint64_t n_vehicles, std::span<const std::uint64_t> m_values,
                      std::span<const double> fprs) {
  out << "n_vehicles,m,fpr,c2rl_bytes,vc_bytes,ratio\n";
  for (auto m : m_values) {
    if (m == 0) throw std::invalid_argument("M must be >= 1");
    for (double p : fprs) {
      auto c = c2rl_size_bytes(n_vehicles, m, p);
      auto v = vc_size_bytes(n_vehicles);
      out << n_vehicles << ',' << m << ',' << std::setprecision(3) << p << ',' << c << ',' << v << ','
          << std::setprecision(4) << static_cast<double>(c) / static_cast<double>(v) << '\n';
    }
  }
}

void write_forge_table(std::ostream& out, std::span<const double> fprs, double hashrate_per_unit, double window_s,
                       double pool_hashrate) {
  out << "fpr,k_hashes,total_hashes,units_needed,pool_time_s,pool_time_h\n";
  for (double p : fprs) {
    auto c = forging_cost(p, hashrate_per_unit, window_s, pool_hashrate);
    out << std::setprecision(3) << p << ',' << c.k_hashes << ',' << std::setprecision(6) << c.total_hashes << ','
        << c.units_needed << ',' << std::fixed << std::setprecision(1) << c.single_pool_time_s << ','
        << c.single_pool_time_s / 3600.0 << std::defaultfloat << '\n';
  }
}

void write_effective_table(std::ostream& out, std::span<const double> totals, double revocation_rate,
                           double windows_per_day) {
  out << "total_psnyms,revocation_rate,windows_per_day,effective_entries\n";
  for (double t : totals)
    out << std::fixed << std::setprecision(0) << t << ',' << std::setprecision(4) << revocation_rate << ','
        << std::setprecision(0) << windows_per_day << ',' << std::setprecision(2)
        << effective_crl_entries(t, revocation_rate, windows_per_day) << std::defaultfloat << '\n';
}

}  // namespace crlmesh::analysis
