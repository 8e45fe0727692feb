#pragma once

#include "ccp/cdwa.hpp"
#include "ccp/cvapf.hpp"
#include "ccp/cycle.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ccp {

/// Configuration of the receding-horizon run loop.
struct PlannerConfig {
  enum class Backend { CVAPF, CDWA };

  Backend backend = Backend::CVAPF;
  Model model = Model::double_integrator();
  /// Field-search tuning; defaults to FieldParams::defaults_for(scenario).
  std::optional<FieldParams> field;
  DwaParams dwa;

  /// Cap of the corridor safety weight. Negative means automatic:
  /// 1e-3 times the smallest eigenvalue of Q0. Explicit values are clamped
  /// to that bound so the safety term can never distort the terminal cost.
  double rho_max = -1.0;
  int cycle_limit = 300;
  /// Strict-interiority slack of the junction condition used when trimming
  /// the applied horizon: both controls at the cut must satisfy
  /// ||u||^2_Q2 <= 1 - junction_margin.
  double junction_margin = 1e-3;

  SolveOptions solver;
  CycleConfig cycle;
  /// When set, the next cycle's search starts on a worker thread while the
  /// current cycle's controls are being committed. Results are identical to
  /// the sequential mode; only wall-clock timing differs.
  bool pipelined = false;
  /// Optional line-delimited run log (one record per cycle).
  std::ostream* log = nullptr;
};

/// Outcome of a full run. All failures are value-carried; run() never throws
/// on planning failure (only on precondition violations such as an invalid
/// scenario).
struct RunResult {
  enum class FailureReason { SearchFailed, Infeasible, ConstraintViolation, CycleLimit };

  Trajectory full_trajectory;  ///< concatenated applied knots, starts at z0
  std::vector<CycleResult> cycles;
  std::vector<int> applied;       ///< controls taken from each cycle
  std::vector<double> min_Ts;     ///< search safety horizon per cycle
  /// Wall time per completed cycle (search wait plus both solves). The only
  /// nondeterministic fields in the result.
  std::vector<double> cycle_compute_s;
  double t_f = 0.0;               ///< h times the total number of applied controls
  bool success = false;
  std::optional<FailureReason> failure_reason;
  std::string failure_note;

  /// Strict objectives per cycle and how often the sequence failed to
  /// decrease — a diagnostic of the contraction assumption, not an error.
  std::vector<double> objective_history;
  int non_contracting = 0;
};

const char* to_string(RunResult::FailureReason r);

/// Largest horizon m <= min(N_max, N-2) such that both controls at the cut
/// (the last applied, u_{m-1}, and the first discarded, u_m) are strictly
/// inside the Q2 ellipsoid by `margin`. Falls back to max(1, N/2) when no
/// index qualifies, and to 1 when N < 3.
int adjust_horizon(const Trajectory& trajectory, const Scenario& s, double margin = 1e-3);

/// Safety weight schedule: zero when the search never saw a coasting
/// threat (min_Ts infinite), growing linearly to rho_max as the predicted
/// time-to-collision shrinks to zero. t_w must be positive.
double update_rho(double min_Ts, double t_w, double rho_max);

/// Runs the two-layer loop: search a nominal trajectory, refine it through
/// the relaxed/strict convex pair, and either stop (terminal weighted
/// distance within gamma) or commit a trimmed prefix of the refined controls
/// and continue from the cut. Obstacles are indexed by accumulated wall
/// clock (h times the number of controls already applied).
RunResult run(const Scenario& s, const PlannerConfig& config = {});

}  // namespace ccp
