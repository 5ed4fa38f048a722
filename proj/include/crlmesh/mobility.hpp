#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <vector>

#include "crlmesh/rng.hpp"

namespace crlmesh::sim {

struct Point {
  double x = 0;
  double y = 0;
};

inline double dist2(Point a, Point b) { return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y); }

/// Manhattan grid of `cols` x `rows` intersections spaced `cell_m` apart.
struct Grid {
  std::uint32_t cols = 10;
  std::uint32_t rows = 10;
  double cell_m = 400;

  std::uint32_t intersections() const { return cols * rows; }
  Point at(std::uint32_t col, std::uint32_t row) const { return {col * cell_m, row * cell_m}; }
  Point at(std::uint32_t id) const { return at(id % cols, id / cols); }
};

/// Random-waypoint walker restricted to grid edges. Each leg picks a random
/// destination intersection and goes horizontal-first or vertical-first with
/// equal probability, at a speed drawn once per leg.
class GridWalker {
 public:
  GridWalker(const Grid& grid, Rng rng, double speed_min, double speed_max, std::uint64_t start_ms);

  /// Position at `t_ms`; `t_ms` must not decrease between calls.
  Point position(std::uint64_t t_ms);

 private:
  void next_leg();

  const Grid* grid_;
  Rng rng_;
  double speed_min_, speed_max_;
  std::uint32_t at_;  // intersection the current leg starts from
  Point from_, corner_, to_;
  double seg1_ = 0, seg2_ = 0, speed_ = 1;
  std::uint64_t leg_start_ms_ = 0;
};

/// Expected number of route visits per intersection when source and
/// destination are uniform and both turn orders are equally likely.
std::vector<double> traversal_weights(const Grid& grid);

/// RSU sites: intersections by descending expected traversal count, ties by
/// (row, col), skipping sites within `range_m` of a placed RSU; if that leaves
/// too few, the skipped sites fill the remainder in rank order.
std::vector<Point> place_rsus(const Grid& grid, std::uint32_t n_rsus, double range_m);

/// Externally generated positions: rows of `time_s,vehicle_id,x,y`.
/// Positions between samples are linearly interpolated.
class Trace {
 public:
  static Trace read_csv(std::istream& in);

  std::vector<std::uint64_t> vehicles() const;
  /// First and last sample time of a vehicle, in ms.
  std::pair<std::uint64_t, std::uint64_t> span(std::uint64_t vehicle) const;
  Point position(std::uint64_t vehicle, std::uint64_t t_ms) const;

 private:
  struct Sample {
    std::uint64_t t_ms;
    Point p;
  };
  std::map<std::uint64_t, std::vector<Sample>> tracks_;
};

}  // namespace crlmesh::sim
