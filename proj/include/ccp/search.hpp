#pragma once

#include "ccp/scenario.hpp"
#include "ccp/types.hpp"

#include <limits>
#include <string>
#include <vector>

namespace ccp {

/// Outcome of a coasting-safety query: does the ray pos + vel*t enter any
/// obstacle ball within the look-ahead window?
struct SafetyReport {
  bool not_safe = false;
  double min_Ts = std::numeric_limits<double>::infinity();  ///< earliest entry time, s
};

/// Earliest time t in [0, t_w] at which the coasting point
/// state[0:2] + state[2:4]*t lies inside an obstacle ball. Each ball
/// contributes the smallest nonnegative root of ||(q - p_j) + v_rel t||^2 =
/// r_j^2, where v_rel subtracts the obstacle's own velocity (one-step finite
/// difference of its track at t_now, held constant over the window) so an
/// obstacle closing in on a slow vehicle is flagged just like the vehicle
/// running at a parked one.
SafetyReport compute_safety(const Vec4& state, const Scenario& s, double t_now, double t_w);

/// Same query against an explicit ball list, frozen in time (no relative
///-velocity correction; suitable for static maps or single-knot checks).
SafetyReport compute_safety(const Vec4& state, const std::vector<Ball>& balls, double t_w);

/// Shared result type of the two trajectory-search algorithms. On success
/// (failed == false) the trajectory holds N+1 states and N controls, all
/// knots are collision-free at their wall-clock times, controls respect
/// ||u||_Q2 <= 1 and states ||z||_Q1 <= 1, and N_min <= N <= N_max.
struct SearchResult {
  Trajectory trajectory;
  int N = 0;
  bool not_safe = false;
  double min_Ts = std::numeric_limits<double>::infinity();
  bool failed = true;
  std::string note;  ///< diagnostic detail when failed
};

}  // namespace ccp
