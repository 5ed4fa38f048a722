#include "crlmesh/scenario_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "crlmesh/crypto.hpp"

namespace crlmesh::sim {

std::string to_string(Scheme s) { return s == Scheme::Baseline ? "baseline" : "vehicle_centric"; }

Scheme scheme_from_string(const std::string& s) {
  if (s == "vehicle_centric") return Scheme::VehicleCentric;
  if (s == "baseline") return Scheme::Baseline;
  throw ConfigError("scheme", "expected vehicle_centric or baseline, got '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key, "cannot parse '" + v + "'");
  return out;
}

template <typename T>
std::string format_number(T v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

struct Field {
  std::string key;
  std::function<void(ScenarioConfig&, const std::string&)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

template <typename T>
Field number(const char* key, T ScenarioConfig::*m) {
  return {key, [key, m](ScenarioConfig& c, const std::string& v) { c.*m = parse_number<T>(key, v); },
          [m](const ScenarioConfig& c) { return format_number(c.*m); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      number("seed", &ScenarioConfig::seed),
      {"scheme", [](ScenarioConfig& c, const std::string& v) { c.scheme = scheme_from_string(v); },
       [](const ScenarioConfig& c) { return to_string(c.scheme); }},
      number("grid_cols", &ScenarioConfig::grid_cols),
      number("grid_rows", &ScenarioConfig::grid_rows),
      number("cell_length_m", &ScenarioConfig::cell_length_m),
      number("n_vehicles", &ScenarioConfig::n_vehicles),
      number("n_rsus", &ScenarioConfig::n_rsus),
      number("speed_min_mps", &ScenarioConfig::speed_min_mps),
      number("speed_max_mps", &ScenarioConfig::speed_max_mps),
      number("trip_mean_s", &ScenarioConfig::trip_mean_s),
      {"trace_file", [](ScenarioConfig& c, const std::string& v) { c.trace_file = v; },
       [](const ScenarioConfig& c) { return c.trace_file; }},
      number("radio_range_m", &ScenarioConfig::radio_range_m),
      number("bitrate_bps", &ScenarioConfig::bitrate_bps),
      number("sim_duration_s", &ScenarioConfig::sim_duration_s),
      number("start_time_s", &ScenarioConfig::start_time_s),
      number("checkpoint_s", &ScenarioConfig::checkpoint_s),
      number("warmup_s", &ScenarioConfig::warmup_s),
      number("pseudonym_lifetime_s", &ScenarioConfig::pseudonym_lifetime_s),
      number("issue_interval_s", &ScenarioConfig::issue_interval_s),
      number("crl_window_s", &ScenarioConfig::crl_window_s),
      number("revocation_rate", &ScenarioConfig::revocation_rate),
      number("total_pseudonyms_per_day", &ScenarioConfig::total_pseudonyms_per_day),
      number("fingerprint_fpr", &ScenarioConfig::fingerprint_fpr),
      number("bandwidth_bytes_per_s", &ScenarioConfig::bandwidth_bytes_per_s),
      {"inbound_limit",
       [](ScenarioConfig& c, const std::string& v) {
         if (v == "true" || v == "1")
           c.inbound_limit = true;
         else if (v == "false" || v == "0")
           c.inbound_limit = false;
         else
           throw ConfigError("inbound_limit", "expected true or false, got '" + v + "'");
       },
       [](const ScenarioConfig& c) { return std::string(c.inbound_limit ? "true" : "false"); }},
      number("fingerprint_tx_s", &ScenarioConfig::fingerprint_tx_s),
      number("piece_tx_s", &ScenarioConfig::piece_tx_s),
      number("fake_piece_tx_s", &ScenarioConfig::fake_piece_tx_s),
      number("query_timeout_s", &ScenarioConfig::query_timeout_s),
      number("query_backoff_max_s", &ScenarioConfig::query_backoff_max_s),
      number("carrier_fraction", &ScenarioConfig::carrier_fraction),
      number("attacker_fraction", &ScenarioConfig::attacker_fraction),
      number("beacon_hz", &ScenarioConfig::beacon_hz),
      number("alpha", &ScenarioConfig::alpha),
      number("beta", &ScenarioConfig::beta),
      number("sign_ms", &ScenarioConfig::sign_ms),
      number("verify_ms", &ScenarioConfig::verify_ms),
      number("bf_test_ms", &ScenarioConfig::bf_test_ms),
  };
  return f;
}

void positive(const char* key, double v) {
  if (!(v > 0)) throw ConfigError(key, "must be positive");
}

void fraction(const char* key, double v) {
  if (!(v >= 0 && v <= 1)) throw ConfigError(key, "must lie in [0, 1]");
}

}  // namespace

void ScenarioConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields())
    if (f.key == key) return f.set(*this, value);
  throw ConfigError(key, "unknown key");
}

void ScenarioConfig::validate() const {
  positive("grid_cols", grid_cols);
  positive("grid_rows", grid_rows);
  positive("cell_length_m", cell_length_m);
  positive("n_vehicles", n_vehicles);
  positive("speed_min_mps", speed_min_mps);
  if (!(speed_max_mps >= speed_min_mps)) throw ConfigError("speed_max_mps", "must be >= speed_min_mps");
  positive("trip_mean_s", trip_mean_s);
  positive("radio_range_m", radio_range_m);
  positive("bitrate_bps", bitrate_bps);
  positive("sim_duration_s", sim_duration_s);
  if (checkpoint_s > sim_duration_s) throw ConfigError("checkpoint_s", "must not exceed sim_duration_s");
  if (warmup_s >= sim_duration_s) throw ConfigError("warmup_s", "must be below sim_duration_s");
  positive("pseudonym_lifetime_s", pseudonym_lifetime_s);
  positive("issue_interval_s", issue_interval_s);
  positive("crl_window_s", crl_window_s);
  if (issue_interval_s % pseudonym_lifetime_s != 0)
    throw ConfigError("issue_interval_s", "must be a multiple of pseudonym_lifetime_s");
  if (crl_window_s % issue_interval_s != 0) throw ConfigError("crl_window_s", "must be a multiple of issue_interval_s");
  if (86'400 % crl_window_s != 0) throw ConfigError("crl_window_s", "must divide one day");
  fraction("revocation_rate", revocation_rate);
  positive("total_pseudonyms_per_day", static_cast<double>(total_pseudonyms_per_day));
  if (!(fingerprint_fpr > 0 && fingerprint_fpr < 1)) throw ConfigError("fingerprint_fpr", "must lie in (0, 1)");
  if (bandwidth_bytes_per_s < 200) throw ConfigError("bandwidth_bytes_per_s", "must be at least 200");
  positive("fingerprint_tx_s", fingerprint_tx_s);
  positive("piece_tx_s", piece_tx_s);
  positive("fake_piece_tx_s", fake_piece_tx_s);
  positive("query_timeout_s", query_timeout_s);
  if (!(query_backoff_max_s >= query_timeout_s))
    throw ConfigError("query_backoff_max_s", "must be >= query_timeout_s");
  fraction("carrier_fraction", carrier_fraction);
  fraction("attacker_fraction", attacker_fraction);
  if (attacker_fraction >= 1) throw ConfigError("attacker_fraction", "must leave some honest vehicles");
  positive("beacon_hz", beacon_hz);
  positive("alpha", alpha);
  positive("beta", beta);
  if (!(sign_ms >= 0)) throw ConfigError("sign_ms", "must be non-negative");
  if (!(verify_ms >= 0)) throw ConfigError("verify_ms", "must be non-negative");
  if (!(bf_test_ms >= 0)) throw ConfigError("bf_test_ms", "must be non-negative");
}

std::string ScenarioConfig::serialize() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

std::string ScenarioConfig::hash() const {
  std::string text;
  for (const auto& f : fields())
    if (f.key != "seed") text += f.key + "=" + f.get(*this) + "\n";
  return to_hex(crlmesh::hash(ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size())).view())
      .substr(0, 16);
}

ScenarioConfig ScenarioConfig::parse(std::istream& in) {
  ScenarioConfig c;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(t, "expected key = value");
    c.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  c.validate();
  return c;
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  return parse(in);
}

}  // namespace crlmesh::sim
