#include "crlmesh/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace crlmesh::sim {

namespace {

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::ofstream open(const std::filesystem::path& p, const SimResult& r) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << "# config_hash=" << r.config.hash() << " seed=" << r.config.seed << " scheme=" << to_string(r.config.scheme)
      << '\n';
  return out;
}

}  // namespace

void write_outputs(const SimResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open(dir / "latency.csv", r);
    out << "vehicle_id,enter_s,complete_s\n";
    for (const auto& v : r.vehicles)
      out << v.id << ',' << fixed(v.enter_s) << ',' << (v.complete_s ? fixed(*v.complete_s) : "") << '\n';
  }
  {
    auto out = open(dir / "cognizant.csv", r);
    out << "t_s,cognizant,present\n";
    for (const auto& c : r.cognizant) out << c.t_s << ',' << c.cognizant << ',' << c.present << '\n';
  }
  {
    auto out = open(dir / "overhead.csv", r);
    out << "window_start_s,bytes_signatures,bytes_fingerprints\n";
    for (const auto& w : r.overhead)
      out << w.window_start_s << ',' << w.bytes_signatures << ',' << w.bytes_fingerprints << '\n';
  }
  {
    auto out = open(dir / "events.csv", r);
    out << "counter,value\n";
    for (const auto& [k, v] : r.counters) out << k << ',' << v << '\n';
  }
  {
    // Busiest honest node per second; the full per-node log stays in memory.
    std::map<std::uint32_t, TxSecond> busiest;
    for (const auto& t : r.crl_tx) {
      auto& b = busiest[t.second];
      if (t.bytes > b.bytes) b = t;
    }
    auto out = open(dir / "bandwidth.csv", r);
    out << "t_s,max_node_bytes,node_id,budget\n";
    for (const auto& [s, t] : busiest)
      out << s << ',' << t.bytes << ',' << t.node << ',' << r.config.bandwidth_bytes_per_s << '\n';
  }
  std::ofstream sum(dir / "summary.txt", std::ios::binary);
  sum << summary_text(r);
}

std::string summary_text(const SimResult& r) {
  std::string s;
  s += "# config_hash=" + r.config.hash() + " seed=" + std::to_string(r.config.seed) + "\n";
  s += "scheme = " + to_string(r.config.scheme) + "\n";
  s += "pieces_per_crl = " + std::to_string(r.pieces_per_crl) + "\n";
  auto p95 = r.p95_latency_s();
  s += "p95_latency_s = " + (p95 ? fixed(*p95) : std::string("none")) + "\n";
  auto p95_all = r.p95_latency_all_s();
  s += "warmup_s = " + std::to_string(r.config.warmup_s) + "\n";
  s += "p95_latency_all_s = " + (p95_all ? fixed(*p95_all) : std::string("none")) + "\n";
  s += "completed_fraction = " + fixed(r.completed_fraction(), 4) + "\n";
  s += "checkpoint_s = " + std::to_string(r.config.checkpoint_s) + "\n";
  s += "checkpoint_cognizant_fraction = " + fixed(r.cognizant_fraction_at(r.config.checkpoint_s), 4) + "\n";
  double final_frac = 0;
  if (!r.cognizant.empty() && r.cognizant.back().present)
    final_frac = static_cast<double>(r.cognizant.back().cognizant) / r.cognizant.back().present;
  s += "final_cognizant_fraction = " + fixed(final_frac, 4) + "\n";
  s += "total_overhead_bytes = " + std::to_string(r.total_overhead_bytes()) + "\n";
  auto v = audit_bandwidth(r);
  s += "bandwidth_audit = " +
       (v ? "violation node " + std::to_string(v->node) + " second " + std::to_string(v->second)
          : std::string("ok")) +
       "\n";
  return s;
}

std::optional<BandwidthViolation> audit_bandwidth(const SimResult& r) {
  // Re-aggregate in case a node was logged in more than one record per second.
  std::map<std::pair<std::uint64_t, std::uint32_t>, std::uint64_t> per;
  for (const auto& t : r.crl_tx) per[{t.node, t.second}] += t.bytes;
  for (const auto& [k, bytes] : per)
    if (bytes > r.config.bandwidth_bytes_per_s)
      return BandwidthViolation{k.first, k.second, static_cast<std::uint32_t>(bytes)};
  return std::nullopt;
}

}  // namespace crlmesh::sim
