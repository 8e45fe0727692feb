#pragma once

#include "ccp/dynamics.hpp"
#include "ccp/search.hpp"

#include <vector>

namespace ccp {

/// Tuning knobs of the dynamic-window search. The scoring policy is a
/// declared stand-in (the underlying algorithm family leaves the selection
/// rule open), so every weight is exposed here and reported by benchmarks.
struct DwaParams {
  int accel_grid = 7;          ///< samples per control axis (>= 3)
  double w_heading = 1.0;      ///< weight of cos(angle to target)
  double w_clearance = 0.4;    ///< weight of normalized next-position clearance
  double w_speed = 0.3;        ///< weight of normalized next-state speed
  double t_w = 1.5;            ///< coasting safety look-ahead, s
  double activation_dist = 10.0;  ///< clearance beyond this scores as 1
};

/// Finite grid of admissible controls at `state`: accel_grid points per axis
/// over the bounding box of the Q2 ellipsoid, keeping controls with
/// ||u||_Q2 <= 1 whose exact one-step successor stays inside the Q1
/// ellipsoid. Never empty: if every Q2-admissible point fails the state
/// check, the single least-violating control is returned instead.
std::vector<Vec2> dynamic_window(const Vec4& state, const Model& model, const Scenario& s,
                                 int accel_grid);

/// Index of the best candidate: w_heading * cos(angle between the next
/// displacement and the target direction) + w_clearance * min(1,
/// clearance/activation) + w_speed * (speed/v_max). Candidates whose next
/// position is inside a ball are discarded; ties break toward the lower
/// index. Returns -1 when every candidate collides.
int evaluate_candidates(const std::vector<Vec2>& candidates, const Vec4& state,
                        const Model& model, const Scenario& s, const Vec2& target_pos,
                        double t_now, const DwaParams& params);

/// Algorithm: window-sample controls, score them against heading, clearance,
/// and speed, step the exact discrete model, and repeat until the horizon is
/// at least N_min with a safe terminal coast, or the cap N_max is reached.
SearchResult run_cdwa(const Vec4& z0, const Scenario& s, const Model& model,
                      const DwaParams& params, double t_start = 0.0);

}  // namespace ccp
