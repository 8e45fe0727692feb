#pragma once

#include "ccp/convex.hpp"
#include "ccp/dynamics.hpp"
#include "ccp/scenario.hpp"
#include "ccp/types.hpp"

#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace ccp {

/// Knobs that select between documented interpretations of the corridor
/// construction. Defaults are the recommended readings.
struct CycleConfig {
  /// Anchor of the detour term: which searched knot the lambda_d coordinate
  /// pulls toward. `previous_knot` uses knot i-1 (knot 1 anchors to itself);
  /// `initial_knot` pins the anchor to knot 1 for every i.
  enum class Anchor { previous_knot, initial_knot };
  /// Obstacle positions used by the corridor geometry: evaluated per knot at
  /// its scheduled wall-clock time, or frozen at the cycle start.
  enum class Timing { time_indexed, frozen };

  Anchor anchor = Anchor::previous_knot;
  Timing timing = Timing::time_indexed;
};

/// Per-knot data of one planning cycle's convex corridor. Index 0 is the
/// cycle's initial knot, where bar_z == tilde_z == z0 by construction.
/// For every knot, positions (1-l)*bar_z[0:2] + l*tilde_z[0:2] with
/// lambda_min < l <= 1 are collision-free.
struct ConvexRegion {
  std::vector<Vec4> bar_z;         ///< relaxed-problem optimizer knots
  std::vector<Vec4> tilde_z;       ///< searched (safe) knots
  std::vector<double> lambda_min;  ///< largest obstacle-boundary root, in [0,1)
  std::vector<double> k;           ///< detour budget per knot, in [0,1]; k[0] = 0

  int N() const { return static_cast<int>(tilde_z.size()) - 1; }
};

/// Position map of knot i: pos(lf, ld) = base + lf*along + ld*detour, where
/// base is the corridor point at lf = 0, `along` spans the safe part of the
/// bar->tilde segment, and `detour` points from tilde toward the anchor knot.
struct CorridorCoeffs {
  Vec2 base = Vec2::Zero();
  Vec2 along = Vec2::Zero();
  Vec2 detour = Vec2::Zero();
};

CorridorCoeffs corridor_coeffs(const ConvexRegion& region, int i, CycleConfig::Anchor anchor);

Vec2 corridor_position(const ConvexRegion& region, int i, double lambda_f, double lambda_d,
                       CycleConfig::Anchor anchor);

/// Variable layout of the relaxed program: x = (z_1..z_N, u_0..u_{N-1}) with
/// the initial knot eliminated (it is data, not a variable).
struct RelaxedLayout {
  int N = 0;
  int n() const { return 6 * N; }
  int state(int i) const { return 4 * (i - 1); }    ///< i in 1..N, 4 components
  int ctrl(int i) const { return 4 * N + 2 * i; }   ///< i in 0..N-1, 2 components
};

/// Variable layout of the strict program:
/// x = (lambda_f_0..N, lambda_d_0..N, z_1[2:4]..z_N[2:4], u_0..u_{N-1}).
/// Positions are not variables; they are affine in (lambda_f_i, lambda_d_i)
/// through the corridor map.
struct StrictLayout {
  int N = 0;
  int n() const { return 6 * N + 2; }
  int lf(int i) const { return i; }                             ///< i in 0..N
  int ld(int i) const { return (N + 1) + i; }                   ///< i in 0..N
  int tail(int i) const { return 2 * (N + 1) + 2 * (i - 1); }   ///< i in 1..N
  int ctrl(int i) const { return 2 * (N + 1) + 2 * N + 2 * i; } ///< i in 0..N-1
};

/// Terminal-drift objective over the reachable tube: minimize
/// (z_N - z_f)' Q0 (z_N - z_f) subject to the one-step dynamics, state norm
/// bound, and control norm bound. Obstacles are not represented at all; the
/// optimizer is the corridor's unconstrained end of the interpolation.
ConvexProgram build_relaxed(const Vec4& z0, int N, const AffineDynamics& dyn,
                            const Scenario& s);

Trajectory unpack_relaxed(const Eigen::VectorXd& x, const Vec4& z0, int N);

/// Raised when a knot's interpolation segment has collapsed (bar == tilde)
/// inside an obstacle. Cannot happen when the searched knots are
/// collision-free, which callers must guarantee.
struct DegenerateSegment : std::logic_error {
  using std::logic_error::logic_error;
};

/// Largest root in [0,1] of ||(1-l)*bar + l*tilde - p_j|| = r_j over all
/// obstacles j, per knot (0 when the segment never crosses a boundary).
/// Obstacles are placed at t_start + i*h per knot i, or frozen at t_start.
std::vector<double> compute_lambda_min(const std::vector<Vec4>& bar_z,
                                       const std::vector<Vec4>& tilde_z, const Scenario& s,
                                       double t_start,
                                       CycleConfig::Timing timing = CycleConfig::Timing::time_indexed);

/// Largest detour budget k_i in {0, 0.1, ..., 1.0} such that the filled
/// triangle {corridor base, tilde_i, tilde_i + k*(anchor - tilde_i)} keeps
/// every obstacle center at least its radius away (exact point-triangle
/// distance, 1e-9 slack). k_0 = 0 always: the initial knot is pinned.
std::vector<double> select_k(const ConvexRegion& region, const Scenario& s, double t_start,
                             const CycleConfig& cfg = {});

/// Corridor-restricted problem over (lambda_f, lambda_d, tail states,
/// controls): same objective as the relaxed problem plus the safety pull
/// rho * ||z0 - z_f|| * ||lambda_f - 1||^2, dynamics written through the
/// corridor position map, norm bounds, the box 0 <= lambda_f <= 1, and the
/// cone 0 <= lambda_d <= k*lambda_f. Knot 0 is pinned to (lambda_f, lambda_d)
/// = (1, 0); knots with k_i = 0 carry lambda_d_i = 0 as an equality so their
/// multipliers stay exact.
ConvexProgram build_strict(const ConvexRegion& region, const AffineDynamics& dyn,
                           const Scenario& s, double rho, const CycleConfig& cfg = {});

/// The searched trajectory written in strict-program coordinates:
/// lambda_f = 1, lambda_d = 0, tails and controls copied. Feasible for
/// build_strict's program by construction.
Eigen::VectorXd strict_encode_search(const ConvexRegion& region, const Trajectory& searched);

/// Raised by recover when the corridor-interpolated knots and the exact
/// control rollout drift apart by more than 1e-6 (a solver tolerance
/// mismatch, not a modeling condition).
struct ResidualTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Rebuild the trajectory from a strict solution vector. The returned states
/// are the exact rollout of the recovered controls through `dyn` (so the
/// discrete dynamics hold to machine precision and replays are bit-stable);
/// the corridor-interpolated positions and solved tails must agree with that
/// rollout within 1e-6 or ResidualTooLarge is thrown.
Trajectory recover(const ConvexRegion& region, const Eigen::VectorXd& strict_x,
                   const AffineDynamics& dyn, const Vec4& z0, const CycleConfig& cfg = {});

/// Certificate that solving the corridor problem was equivalent to solving
/// the obstacle-constrained problem at this cycle. True when either
///  1) every knot has lambda_min = 0 or tilde == bar (the relaxed optimum
///     was already collision-free where it differs from the search), or
///  2) the solved (lambda_f, lambda_d) sit strictly inside their box/cone
///     bounds by 1e-6 at every knot — the relative-interior proxy. Knots
///     whose corridor set is a single point (or collapsed to one direction)
///     check only the directions that exist.
bool certify_local_optimum(const ConvexRegion& region, const Eigen::VectorXd& lambda_f,
                           const Eigen::VectorXd& lambda_d, const CycleConfig& cfg = {});

struct CycleDiagnostics {
  Solution::Status relaxed_status = Solution::Status::IllConditioned;
  Solution::Status strict_status = Solution::Status::IllConditioned;
  double relaxed_solve_s = 0.0;
  double strict_solve_s = 0.0;
  int relaxed_newton_iters = 0;
  int strict_newton_iters = 0;
  double min_clearance = 0.0;  ///< over recovered knots at their knot times
};

struct CycleResult {
  Trajectory trajectory;  ///< recovered; states exact rollout of controls
  Eigen::VectorXd lambda_f, lambda_d;
  double rho_used = 0.0;
  int N = 0;
  double relaxed_objective = 0.0;
  double strict_objective = 0.0;  ///< includes the safety term when rho > 0
  bool local_optimum_certified = false;
  CycleDiagnostics diagnostics;
};

/// One full planning cycle: solve the relaxed problem (warm-started from the
/// search), extract the corridor, solve the strict problem, recover.
struct CycleOutcome {
  enum class Status {
    Ok,
    RelaxedNotOptimal,  ///< relaxed solve did not reach Optimal
    StrictNotOptimal,   ///< strict solve did not reach Optimal
    RecoveryMismatch,   ///< recover() exceeded its residual bound
  };

  Status status = Status::Ok;
  ConvexRegion region;
  CycleResult result;  ///< fully populated only when status == Ok
  Solution relaxed;    ///< raw solver outputs, kept for post-mortems
  Solution strict;
};

const char* to_string(CycleOutcome::Status s);

CycleOutcome solve_cycle(const Vec4& z0, const Trajectory& searched, const AffineDynamics& dyn,
                         const Scenario& s, double rho, double t_start = 0.0,
                         const SolveOptions& opts = {}, const CycleConfig& cfg = {});

/// Plain-text post-mortem dumps. Format: one "key: value" header block, then
/// one line per knot (index, bar, tilde, lambda_min, k) or one labeled matrix
/// block per program component, each row space-separated at full precision.
void dump_region(std::ostream& os, const ConvexRegion& region);
void dump_program(std::ostream& os, const ConvexProgram& p, const std::string& name);

}  // namespace ccp
