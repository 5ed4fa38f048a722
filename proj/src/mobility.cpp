#include "crlmesh/mobility.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "crlmesh/log.hpp"

namespace crlmesh::sim {

GridWalker::GridWalker(const Grid& grid, Rng rng, double speed_min, double speed_max, std::uint64_t start_ms)
    : grid_(&grid), rng_(std::move(rng)), speed_min_(speed_min), speed_max_(speed_max), leg_start_ms_(start_ms) {
  at_ = static_cast<std::uint32_t>(rng_.below(grid.intersections()));
  next_leg();
}

void GridWalker::next_leg() {
  const std::uint32_t n = grid_->intersections();
  std::uint32_t dest = at_;
  if (n > 1)
    while (dest == at_) dest = static_cast<std::uint32_t>(rng_.below(n));
  from_ = grid_->at(at_);
  to_ = grid_->at(dest);
  corner_ = rng_.bernoulli(0.5) ? Point{to_.x, from_.y} : Point{from_.x, to_.y};
  seg1_ = std::abs(corner_.x - from_.x) + std::abs(corner_.y - from_.y);
  seg2_ = std::abs(to_.x - corner_.x) + std::abs(to_.y - corner_.y);
  speed_ = rng_.uniform(speed_min_, speed_max_);
  at_ = dest;
}

Point GridWalker::position(std::uint64_t t_ms) {
  for (;;) {
    const double total = seg1_ + seg2_;
    const auto leg_ms = static_cast<std::uint64_t>(std::ceil(total / speed_ * 1000.0));
    if (t_ms < leg_start_ms_ + leg_ms || total == 0.0) break;
    leg_start_ms_ += leg_ms;
    next_leg();
  }
  double d = speed_ * static_cast<double>(t_ms - leg_start_ms_) / 1000.0;
  auto lerp = [](Point a, Point b, double len, double along) {
    if (len <= 0) return b;
    double f = std::min(1.0, along / len);
    return Point{a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f};
  };
  if (d <= seg1_) return lerp(from_, corner_, seg1_, d);
  return lerp(corner_, to_, seg2_, d - seg1_);
}

std::vector<double> traversal_weights(const Grid& grid) {
  const std::uint32_t C = grid.cols, R = grid.rows, n = grid.intersections();
  std::vector<double> w(n, 0.0);
  auto walk = [&](std::uint32_t c1, std::uint32_t r1, std::uint32_t c2, std::uint32_t r2, bool horizontal_first) {
    std::uint32_t c = c1, r = r1;
    w[r * C + c] += 0.5;
    auto step_to = [&](std::uint32_t& v, std::uint32_t target) {
      while (v != target) {
        v = v < target ? v + 1 : v - 1;
        w[r * C + c] += 0.5;
      }
    };
    if (horizontal_first) {
      step_to(c, c2);
      step_to(r, r2);
    } else {
      step_to(r, r2);
      step_to(c, c2);
    }
  };
  for (std::uint32_t s = 0; s < n; ++s)
    for (std::uint32_t d = 0; d < n; ++d) {
      if (s == d) continue;
      walk(s % C, s / C, d % C, d / C, true);
      walk(s % C, s / C, d % C, d / C, false);
    }
  const double pairs = static_cast<double>(n) * (n > 1 ? n - 1 : 1);
  for (auto& x : w) x /= pairs;
  (void)R;
  return w;
}

std::vector<Point> place_rsus(const Grid& grid, std::uint32_t n_rsus, double range_m) {
  const std::uint32_t n = grid.intersections();
  if (n_rsus > n) spdlog::warn("n_rsus={} exceeds {} intersections; placing one per intersection", n_rsus, n);
  auto w = traversal_weights(grid);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  // Intersection ids are row-major, so a stable sort keeps (row, col) order on ties.
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return w[a] > w[b] + 1e-12;
  });

  std::vector<Point> placed;
  std::vector<std::uint32_t> skipped;
  const double r2 = range_m * range_m;
  for (std::uint32_t id : order) {
    if (placed.size() == n_rsus) break;
    Point p = grid.at(id);
    bool near = std::any_of(placed.begin(), placed.end(), [&](Point q) { return dist2(p, q) < r2; });
    if (near)
      skipped.push_back(id);
    else
      placed.push_back(p);
  }
  for (std::uint32_t id : skipped) {
    if (placed.size() == n_rsus) break;
    placed.push_back(grid.at(id));
  }
  return placed;
}

Trace Trace::read_csv(std::istream& in) {
  Trace t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!(std::isdigit(static_cast<unsigned char>(line[0])) || line[0] == '.' || line[0] == '-')) {
      if (lineno == 1) continue;  // header
      throw std::invalid_argument("trace line " + std::to_string(lineno) + ": not a data row");
    }
    std::stringstream ss(line);
    std::string f[4];
    for (auto& s : f)
      if (!std::getline(ss, s, ','))
        throw std::invalid_argument("trace line " + std::to_string(lineno) + ": expected time_s,vehicle_id,x,y");
    try {
      double ts = std::stod(f[0]);
      if (ts < 0) throw std::invalid_argument("negative time");
      auto id = static_cast<std::uint64_t>(std::stoull(f[1]));
      t.tracks_[id].push_back({static_cast<std::uint64_t>(std::llround(ts * 1000.0)), {std::stod(f[2]), std::stod(f[3])}});
    } catch (const std::logic_error& e) {
      throw std::invalid_argument("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (auto& [id, samples] : t.tracks_)
    std::stable_sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) { return a.t_ms < b.t_ms; });
  return t;
}

std::vector<std::uint64_t> Trace::vehicles() const {
  std::vector<std::uint64_t> out;
  for (const auto& [id, s] : tracks_) out.push_back(id);
  return out;
}

std::pair<std::uint64_t, std::uint64_t> Trace::span(std::uint64_t vehicle) const {
  const auto& s = tracks_.at(vehicle);
  return {s.front().t_ms, s.back().t_ms};
}

Point Trace::position(std::uint64_t vehicle, std::uint64_t t_ms) const {
  const auto& s = tracks_.at(vehicle);
  auto it = std::lower_bound(s.begin(), s.end(), t_ms, [](const Sample& a, std::uint64_t t) { return a.t_ms < t; });
  if (it == s.begin()) return s.front().p;
  if (it == s.end()) return s.back().p;
  const auto& b = *it;
  const auto& a = *(it - 1);
  double f = static_cast<double>(t_ms - a.t_ms) / static_cast<double>(b.t_ms - a.t_ms);
  return {a.p.x + (b.p.x - a.p.x) * f, a.p.y + (b.p.y - a.p.y) * f};
}

}  // namespace crlmesh::sim
