#pragma once

#include "ccp/dynamics.hpp"
#include "ccp/search.hpp"

#include <functional>
#include <optional>

namespace ccp {

/// Tuning knobs of the vortex potential-field search.
struct FieldParams {
  double zeta = 5.0e4;         ///< repulsion weight (> 0)
  double beta = 2.0;           ///< repulsion sharpness (> 0)
  double zeta_v0 = 300.0;      ///< vortex gain (>= 0)
  double activation_dist = 12.0;  ///< vortex switches on within this surface distance, m
  double a0 = 12.0;            ///< braking weight of the fallback acceleration, m/s^2
  double a1 = 8.0;             ///< steering weight of the fallback acceleration, m/s^2
  double t_w = 1.5;            ///< coasting safety look-ahead, s
  int speed_steps = 20;        ///< speed scan resolution from v_max down to 0

  /// Defaults scaled to a scenario's limits: a0 = 0.6 a_max, a1 = 0.4 a_max,
  /// so that ||a_safe|| <= a0 + a1 = a_max and fallback steps shed speed.
  static FieldParams defaults_for(const Scenario& s);
};

/// Gradient of the attractive potential ||pos - zf_pos||^2.
Vec2 attractive_gradient(const Vec2& pos, const Vec2& zf_pos);

/// Gradient of zeta * sum_j exp(-beta (||pos - p_j|| - r_j) / r_j). The
/// contribution of a ball is defined as zero exactly at its center.
Vec2 repulsive_gradient(const Vec2& pos, const std::vector<Ball>& balls, double zeta,
                        double beta);

/// Unit vector orthogonal to the repulsive gradient, picking the candidate
/// pointing most toward the target; falls back to the target direction when
/// the repulsive gradient vanishes.
Vec2 vortex_direction(const Vec2& pos, const std::vector<Ball>& balls, const Vec2& target_pos,
                      double zeta, double beta);

/// Normalized total field -(grad P_att + grad P_rep) + zeta_v * d.
/// Empty when the field magnitude is below 1e-12 (degenerate point: the
/// caller retries from a slightly perturbed position).
std::optional<Vec2> total_field_direction(const Vec2& pos, const std::vector<Ball>& balls,
                                          const Vec2& target_pos, double zeta, double beta,
                                          double zeta_v);

/// Inputs of the speed scan that are pure state/limit data.
struct SpeedSearchLimits {
  Vec2 pos;                ///< knot position the velocity is being chosen at
  double v_max = 0.0;
  double a_max = 0.0;
  double h = 0.0;
  Mat4 Q1 = Mat4::Identity();
};

/// Scans s over {v_max, v_max (1 - 1/steps), ..., 0} and returns the first
/// speed whose velocity s*direction is (a) reachable within one step,
/// (b) accepted by velocity_ok (collision look-ahead), and (c) keeps the
/// state inside the Q1 ellipsoid. Empty when no speed qualifies.
std::optional<double> speed_search(const Vec2& direction, const Vec2& current_velocity,
                                   const SpeedSearchLimits& lim,
                                   const std::function<bool(const Vec2&)>& velocity_ok,
                                   int speed_steps);

/// Fallback acceleration a1 * E - a0 * v_hat; the braking term is dropped
/// for a vehicle at rest. Norm is bounded by a0 + a1 by construction.
Vec2 safe_acceleration(const Vec2& field_direction, const Vec2& current_velocity, double a0,
                       double a1);

/// Algorithm: grow a trajectory knot by knot — extrapolate the position with
/// the previous knot's velocity, evaluate the field there, pick a speed (or
/// brake along the fallback acceleration), and keep going until the horizon
/// is at least N_min and the last knot coasts clear of every ball for t_w
/// seconds, or the horizon cap is hit. Controls are reconstructed against
/// `dyn` (defaults to the double-integrator one-step map) and the result is
/// rejected if any invariant fails.
SearchResult run_cvapf(const Vec4& z0, const Scenario& s, const FieldParams& params,
                       double t_start = 0.0,
                       const std::optional<AffineDynamics>& dyn = std::nullopt);

}  // namespace ccp
