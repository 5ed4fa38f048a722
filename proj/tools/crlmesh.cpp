// crlmesh: scenario runs, analysis tables and protocol self-checks.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>
#include <vector>

#include "crlmesh/analysis.hpp"
#include "crlmesh/log.hpp"
#include "crlmesh/metrics.hpp"
#include "crlmesh/scenario_config.hpp"
#include "crlmesh/selftest.hpp"
#include "crlmesh/simulator.hpp"

namespace fs = std::filesystem;
using namespace crlmesh;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct RunOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::string scheme;
  unsigned parallel_seeds = 1;
};

int run_one(const sim::ScenarioConfig& cfg, const fs::path& dir) {
  auto result = sim::run(cfg);
  sim::write_outputs(result, dir);
  std::cout << sim::summary_text(result);
  if (auto v = sim::audit_bandwidth(result)) {
    spdlog::error("node {} sent {} CRL bytes in second {} (budget {})", v->node, v->bytes, v->second,
                  cfg.bandwidth_bytes_per_s);
    return kRuntimeError;
  }
  return kOk;
}

int cmd_run(const RunOptions& o) {
  sim::ScenarioConfig cfg;
  try {
    cfg = sim::ScenarioConfig::load(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (!o.scheme.empty()) cfg.scheme = sim::scheme_from_string(o.scheme);
    cfg.validate();
  } catch (const sim::ConfigError& e) {
    spdlog::error("config error in key '{}': {}", e.key(), e.what());
    return kConfigError;
  }

  if (o.parallel_seeds <= 1) return run_one(cfg, o.out_dir);

  // Independent seeds share nothing, so each gets its own thread and directory.
  std::vector<int> codes(o.parallel_seeds, kOk);
  std::vector<std::thread> workers;
  for (unsigned i = 0; i < o.parallel_seeds; ++i) {
    workers.emplace_back([&, i] {
      auto c = cfg;
      c.seed = cfg.seed + i;
      try {
        auto result = sim::run(c);
        sim::write_outputs(result, fs::path(o.out_dir) / ("seed_" + std::to_string(c.seed)));
        if (sim::audit_bandwidth(result)) codes[i] = kRuntimeError;
      } catch (const std::exception& e) {
        spdlog::error("seed {}: {}", c.seed, e.what());
        codes[i] = kRuntimeError;
      }
    });
  }
  for (auto& w : workers) w.join();
  for (unsigned i = 0; i < o.parallel_seeds; ++i) {
    auto dir = fs::path(o.out_dir) / ("seed_" + std::to_string(cfg.seed + i));
    std::ifstream in(dir / "summary.txt");
    if (in) std::cout << "== " << dir.string() << '\n' << in.rdbuf();
  }
  for (int c : codes)
    if (c != kOk) return c;
  return kOk;
}

struct AnalyzeOptions {
  std::string table;
  std::vector<std::uint64_t> pieces{10, 20};
  std::vector<double> fprs;
  std::uint64_t vehicles = 10'000;
  std::vector<std::uint64_t> m_values{1, 2, 4, 6, 8, 10};
  double hashrate = analysis::kMinerHashrate;
  double window_s = 3600;
  double pool = analysis::kPoolHashrate;
  std::vector<double> totals{3'425'565, 1'712'782, 342'556, 171'278};
  double rate = 0.01;
  double windows = 24;
  std::string out;
};

int cmd_analyze(AnalyzeOptions o) {
  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) {
      spdlog::error("cannot write {}", o.out);
      return kConfigError;
    }
  }
  std::ostream& out = o.out.empty() ? std::cout : file;
  try {
    if (o.table == "fig2") {
      if (o.fprs.empty()) o.fprs = {1e-5, 1e-10, 1e-15, 1e-20, 1e-25, 1e-30};
      analysis::write_fig2_table(out, o.pieces, o.fprs);
    } else if (o.table == "fig4") {
      if (o.fprs.empty()) o.fprs = {1e-10, 1e-20, 1e-30};
      analysis::write_fig4_table(out, o.vehicles, o.m_values, o.fprs);
    } else if (o.table == "forge") {
      if (o.fprs.empty()) o.fprs = {1e-20, 1e-22, 1e-23, 1e-30};
      analysis::write_forge_table(out, o.fprs, o.hashrate, o.window_s, o.pool);
    } else {
      analysis::write_effective_table(out, o.totals, o.rate, o.windows);
    }
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return kConfigError;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  log::init_from_env();
  CLI::App app{"CRL distribution: scenario runs, analysis tables, self-checks"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write CSV metrics");
  run_cmd->add_option("config", run.config, "Scenario config (key = value lines)")->required();
  run_cmd->add_option("--seed", run.seed, "Override the config seed");
  run_cmd->add_option("--out-dir", run.out_dir, "Output directory")->capture_default_str();
  run_cmd->add_option("--scheme", run.scheme, "vehicle_centric or baseline")
      ->check(CLI::IsMember({"vehicle_centric", "baseline"}));
  run_cmd->add_option("--parallel-seeds", run.parallel_seeds, "Run k consecutive seeds in parallel")
      ->check(CLI::PositiveNumber);

  AnalyzeOptions an;
  auto* an_cmd = app.add_subcommand("analyze", "Emit an analysis table as CSV");
  an_cmd->add_option("--table", an.table, "fig2, fig4, forge or effective")
      ->required()
      ->check(CLI::IsMember({"fig2", "fig4", "forge", "effective"}));
  an_cmd->add_option("--pieces", an.pieces, "fig2: piece counts");
  an_cmd->add_option("--fpr", an.fprs, "fig2/fig4/forge: false-positive rates");
  an_cmd->add_option("--vehicles", an.vehicles, "fig4: revoked vehicles N");
  an_cmd->add_option("--m", an.m_values, "fig4: revoked pseudonyms per vehicle per window");
  an_cmd->add_option("--hashrate", an.hashrate, "forge: hashes per second of one unit");
  an_cmd->add_option("--window", an.window_s, "forge: CRL window in seconds");
  an_cmd->add_option("--pool", an.pool, "forge: pool hashes per second");
  an_cmd->add_option("--total", an.totals, "effective: pseudonyms per day");
  an_cmd->add_option("--rate", an.rate, "effective: revocation rate");
  an_cmd->add_option("--windows", an.windows, "effective: windows per day");
  an_cmd->add_option("--out", an.out, "Write to a file instead of stdout");

  std::uint64_t st_seed = 1;
  auto* st_cmd = app.add_subcommand("selftest", "Hash-chain, Bloom, wire and unlinkability checks");
  st_cmd->add_option("--seed", st_seed, "Seed for the randomized cases");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*an_cmd) return cmd_analyze(an);
    if (*st_cmd) {
      auto results = selftest::run_all(std::cout, st_seed);
      for (const auto& r : results)
        if (!r.passed) return kRuntimeError;
      return kOk;
    }
  } catch (const sim::ConfigError& e) {
    spdlog::error("config error in key '{}': {}", e.key(), e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntimeError;
  }
  return kOk;
}
