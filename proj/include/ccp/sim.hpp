#pragma once

#include "ccp/planner.hpp"

#include <cstdint>
#include <vector>

namespace ccp {

/// Closed-loop simulation settings. The planner config is passed through
/// unchanged; the extra knobs only affect metric computation.
struct SimConfig {
  PlannerConfig planner;

  /// When set, a run also fails if any cycle's compute time exceeds the
  /// duration of the horizon it applied (applied * h): the vehicle would
  /// have run out of committed controls while the next cycle was still
  /// solving. Off by default because it makes success wall-clock dependent.
  bool deadline = false;

  /// Added to every cycle's measured compute time before the deadline
  /// check. Test hook for forcing deadline failures deterministically.
  double injected_compute_delay_s = 0.0;

  /// Sub-knot samples per control interval used for min_clearance on maps
  /// with moving obstacles (vehicle linearly interpolated between knots,
  /// obstacle centers evaluated exactly).
  int clearance_substeps = 10;
};

/// Aggregate quality numbers for one closed-loop run. Every field except the
/// compute_* times is deterministic in (scenario, config).
struct RunMetrics {
  bool success = false;

  /// Failure classification; at most one of the first two is set, and
  /// excessive time can only be set in deadline mode. A run that exhausts
  /// the cycle limit fails without setting any of these.
  bool fail_infeasibility = false;
  bool fail_constraint_violation = false;
  bool fail_excessive_time = false;

  double t_f = 0.0;  ///< duration of the applied trajectory (partial on failure)
  int cycles = 0;

  double compute_total_s = 0.0;
  double compute_avg_s = 0.0;
  double compute_median_s = 0.0;
  double compute_worst_s = 0.0;

  /// Minimum surface clearance over all knots at their knot times; on maps
  /// with moving obstacles additionally over dense sub-knot samples.
  /// +infinity on obstacle-free maps.
  double min_clearance = 0.0;

  /// Clearance at interval midpoints (t + h/2, averaged knot positions).
  /// Informational only: the planner guarantees feasibility at the discrete
  /// knots, so this audit never affects success.
  double midpoint_min_clearance = 0.0;

  /// Fraction of cycles whose strict solution carried the local-optimality
  /// certificate.
  double local_optimum_rate = 0.0;
};

struct SimResult {
  RunMetrics metrics;
  RunResult run;
};

/// Runs the planner closed-loop on the scenario (obstacles advance with the
/// applied controls through their motion records) and computes run metrics.
/// Planning failures are metric-carried; this never throws on them.
SimResult simulate(const Scenario& s, const SimConfig& config = {});

/// Per-knot time series of the minimum surface clearance: entry i is the
/// distance at time i*h from knot i to the nearest ball surface (+infinity
/// when the map has no obstacles). Plot-ready companion to RunMetrics.
std::vector<double> clearance_trace(const RunResult& run, const Scenario& s);

struct BatchRow {
  std::uint64_t seed = 0;
  RunMetrics metrics;
};

/// Batch aggregate. Compute-time statistics pool the individual planning
/// cycles of every run (not per-run averages), matching how the per-cycle
/// cost of the method is usually reported; local_optimum_rate is likewise
/// certified cycles over all cycles.
struct BatchSummary {
  int runs = 0;
  int successes = 0;
  long total_cycles = 0;
  double success_rate = 0.0;
  double compute_avg_s = 0.0;
  double compute_median_s = 0.0;
  double compute_worst_s = 0.0;
  double local_optimum_rate = 0.0;
};

struct BatchResult {
  std::vector<BatchRow> rows;  ///< one per seed, in input order
  BatchSummary summary;
};

/// Generates one scenario per seed and simulates each, fanning runs out
/// across threads. Rows come back in seed order and, timing fields aside,
/// are identical to batch_serial's. Throws GenerationError if a seed cannot
/// produce a valid map.
BatchResult batch(const std::vector<std::uint64_t>& seeds, const GenerationParams& params,
                  const SimConfig& config = {});

/// Single-threaded reference implementation of batch with the same contract.
BatchResult batch_serial(const std::vector<std::uint64_t>& seeds,
                         const GenerationParams& params, const SimConfig& config = {});

}  // namespace ccp
