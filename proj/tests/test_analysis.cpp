#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "crlmesh/analysis.hpp"
#include "crlmesh/bloom.hpp"

using namespace crlmesh;
using namespace crlmesh::analysis;

// Expected values below were worked by hand from the closed forms and frozen.

TEST_CASE("hash count rounds -log2 p to the nearest integer") {
  CHECK(bloom::optimal_k(1e-20) == 66);  // -log2 = 66.44
  CHECK(bloom::optimal_k(1e-22) == 73);  // 73.08
  CHECK(bloom::optimal_k(1e-23) == 76);  // 76.40
  CHECK(bloom::optimal_k(1e-30) == 100);  // 99.66
  CHECK(bloom::optimal_k(1e-3) == 10);  // 9.97
}

TEST_CASE("filter size for ten pieces") {
  CHECK(bloom::size_bits(10, 1e-20) == 959);  // 958.51
  CHECK(fingerprint_overhead(10, 1e-20) == 120);
  CHECK(fingerprint_overhead(1, 1e-30) == 18);  // 143.8 bits
  CHECK(concat_overhead(10, 20) == 200);
  CHECK(concat_overhead(10, 32) == 320);
  CHECK_THROWS_AS(fingerprint_overhead(0, 1e-20), std::invalid_argument);
}

TEST_CASE("forging cost at the default hardware figures") {
  auto c = forging_cost(1e-20);
  CHECK(c.k_hashes == 66);
  CHECK(c.total_hashes == doctest::Approx(6.6e21));
  CHECK(c.units_needed == 130'953);  // 6.6e21 / (14e12 * 3600) = 130,952.4
  CHECK(c.single_pool_time_s == doctest::Approx(4113.2).epsilon(1e-4));
  CHECK_THROWS_AS(forging_cost(0), std::invalid_argument);
  CHECK_THROWS_AS(forging_cost(1e-20, 0), std::invalid_argument);
}

TEST_CASE("forging cost grows with the filter strength") {
  double prev = 0;
  for (double p : {1e-20, 1e-22, 1e-23, 1e-30}) {
    auto c = forging_cost(p);
    CHECK(c.total_hashes > prev);
    prev = c.total_hashes;
  }
}

TEST_CASE("per-vehicle CRL size") {
  CHECK(vc_size_bytes(10'000) == 625 * 1024);
  CHECK(vc_wire_size_bytes(10'000) == 650'000);
  CHECK(vc_size_bytes(0) == 0);
}

TEST_CASE("compressed CRL size") {
  CHECK(c2rl_size_bytes(10'000, 1, 1e-10) == 59'907);  // 479,254.7 bits
  CHECK(c2rl_size_bytes(10'000, 10, 1e-10) == 599'067);  // 4,792,529.2 bits
  std::uint64_t prev = 0;
  for (std::uint64_t m = 1; m <= 10; ++m) {
    auto s = c2rl_size_bytes(10'000, m, 1e-20);
    CHECK(s > prev);
    prev = s;
  }
  CHECK_THROWS_AS(c2rl_size_bytes(10'000, 0, 1e-20), std::invalid_argument);
}

TEST_CASE("break-even rate equalizes the two sizes") {
  for (std::uint64_t m : {1, 4, 10}) {
    double p = c2rl_break_even_fpr(m);
    auto c = static_cast<double>(c2rl_size_bytes(10'000, m, p));
    CHECK(c == doctest::Approx(static_cast<double>(vc_size_bytes(10'000))).epsilon(1e-4));
  }
}

TEST_CASE("effective entries per window") {
  CHECK(effective_crl_entries(3'425'565, 0.01, 24) == doctest::Approx(1427.32).epsilon(1e-5));
  CHECK(effective_crl_entries(1'712'782, 0.01, 24) == doctest::Approx(713.66).epsilon(1e-5));
  CHECK(effective_crl_entries(342'556, 0.01, 24) == doctest::Approx(142.7317).epsilon(1e-5));
  CHECK(effective_crl_entries(171'278, 0.01, 24) == doctest::Approx(71.37).epsilon(1e-4));
  CHECK(effective_crl_entries(1'000, 0, 24) == 0);
  CHECK_THROWS_AS(effective_crl_entries(1'000, 0.01, 0), std::invalid_argument);
}

TEST_CASE("tables have a header and one row per combination") {
  std::ostringstream fig2, fig4, forge, eff;
  std::vector<std::uint64_t> pieces{10, 20};
  std::vector<double> fprs{1e-20, 1e-30};
  write_fig2_table(fig2, pieces, fprs);
  std::vector<std::uint64_t> ms{1, 2, 4};
  write_fig4_table(fig4, 10'000, ms, fprs);
  write_forge_table(forge, fprs, kMinerHashrate, 3600, kPoolHashrate);
  std::vector<double> totals{1'712'782};
  write_effective_table(eff, totals, 0.01, 24);
  auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
  CHECK(lines(fig2.str()) == 1 + 4);
  CHECK(lines(fig4.str()) == 1 + 6);
  CHECK(lines(forge.str()) == 1 + 2);
  CHECK(lines(eff.str()) == 1 + 1);
  CHECK(fig2.str().find("10,1e-20,66,120,200,320") != std::string::npos);
  CHECK(forge.str().find(",130953,") != std::string::npos);

  std::vector<std::uint64_t> bad{0};
  std::ostringstream sink;
  CHECK_THROWS_AS(write_fig4_table(sink, 10'000, bad, fprs), std::invalid_argument);
}
