#include "ccp/sim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

namespace ccp {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void fill_compute_stats(const std::vector<double>& times, RunMetrics& m) {
  if (times.empty()) return;
  m.compute_total_s = std::accumulate(times.begin(), times.end(), 0.0);
  m.compute_avg_s = m.compute_total_s / static_cast<double>(times.size());
  m.compute_median_s = median_of(times);
  m.compute_worst_s = *std::max_element(times.begin(), times.end());
}

/// Knot clearances plus, on moving maps, dense sub-knot samples with the
/// vehicle linearly interpolated; `at_midpoints` instead samples only the
/// interval midpoints for the separate h/2 audit.
double sweep_clearance(const Trajectory& traj, const Scenario& s, int substeps,
                       bool at_midpoints) {
  double worst = std::numeric_limits<double>::infinity();
  const std::size_t n = traj.states.size();
  if (at_midpoints) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const Vec2 mid = 0.5 * (position_of(traj.states[i]) + position_of(traj.states[i + 1]));
      worst = std::min(worst,
                       surface_clearance(s, mid, (static_cast<double>(i) + 0.5) * s.h));
    }
    return worst;
  }
  for (std::size_t i = 0; i < n; ++i)
    worst = std::min(worst, surface_clearance(s, position_of(traj.states[i]),
                                              static_cast<double>(i) * s.h));
  if (s.has_moving_obstacles() && substeps > 1) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const Vec2 a = position_of(traj.states[i]);
      const Vec2 b = position_of(traj.states[i + 1]);
      for (int k = 1; k < substeps; ++k) {
        const double f = static_cast<double>(k) / substeps;
        const Vec2 p = (1.0 - f) * a + f * b;
        worst = std::min(worst, surface_clearance(s, p, (static_cast<double>(i) + f) * s.h));
      }
    }
  }
  return worst;
}

RunMetrics compute_metrics(const RunResult& r, const Scenario& s, const SimConfig& config) {
  RunMetrics m;
  m.success = r.success;
  m.t_f = r.t_f;
  m.cycles = static_cast<int>(r.cycles.size());

  std::vector<double> times = r.cycle_compute_s;
  for (double& t : times) t += config.injected_compute_delay_s;
  fill_compute_stats(times, m);

  if (r.failure_reason) {
    switch (*r.failure_reason) {
      case RunResult::FailureReason::SearchFailed:
      case RunResult::FailureReason::Infeasible:
        m.fail_infeasibility = true;
        break;
      case RunResult::FailureReason::ConstraintViolation:
        m.fail_constraint_violation = true;
        break;
      case RunResult::FailureReason::CycleLimit:
        break;  // a budget exhaustion, not one of the tracked causes
    }
  }

  if (config.deadline) {
    for (std::size_t i = 0; i < times.size() && i < r.applied.size(); ++i) {
      if (times[i] > r.applied[i] * s.h) {
        m.fail_excessive_time = true;
        m.success = false;
        break;
      }
    }
  }

  m.min_clearance = sweep_clearance(r.full_trajectory, s, config.clearance_substeps, false);
  m.midpoint_min_clearance = sweep_clearance(r.full_trajectory, s, 0, true);

  int certified = 0;
  for (const CycleResult& c : r.cycles) certified += c.local_optimum_certified ? 1 : 0;
  if (m.cycles > 0)
    m.local_optimum_rate = static_cast<double>(certified) / static_cast<double>(m.cycles);
  return m;
}

struct SeedOutcome {
  BatchRow row;
  std::vector<double> cycle_times;
  long certified = 0;
};

SeedOutcome run_seed(std::uint64_t seed, const GenerationParams& params,
                     const SimConfig& config) {
  const Scenario s = generate_scenario(params, seed);
  SimResult res = simulate(s, config);
  SeedOutcome out;
  out.row.seed = seed;
  out.row.metrics = res.metrics;
  out.cycle_times = std::move(res.run.cycle_compute_s);
  for (const CycleResult& c : res.run.cycles) out.certified += c.local_optimum_certified;
  return out;
}

BatchResult assemble(std::vector<SeedOutcome>&& outcomes) {
  BatchResult b;
  b.summary.runs = static_cast<int>(outcomes.size());
  std::vector<double> all_times;
  long certified = 0;
  for (SeedOutcome& o : outcomes) {
    b.summary.successes += o.row.metrics.success ? 1 : 0;
    b.summary.total_cycles += o.row.metrics.cycles;
    certified += o.certified;
    all_times.insert(all_times.end(), o.cycle_times.begin(), o.cycle_times.end());
    b.rows.push_back(std::move(o.row));
  }
  if (b.summary.runs > 0)
    b.summary.success_rate =
        static_cast<double>(b.summary.successes) / static_cast<double>(b.summary.runs);
  if (!all_times.empty()) {
    b.summary.compute_avg_s = std::accumulate(all_times.begin(), all_times.end(), 0.0) /
                              static_cast<double>(all_times.size());
    b.summary.compute_median_s = median_of(all_times);
    b.summary.compute_worst_s = *std::max_element(all_times.begin(), all_times.end());
  }
  if (b.summary.total_cycles > 0)
    b.summary.local_optimum_rate =
        static_cast<double>(certified) / static_cast<double>(b.summary.total_cycles);
  return b;
}

}  // namespace

SimResult simulate(const Scenario& s, const SimConfig& config) {
  SimResult out;
  out.run = run(s, config.planner);
  out.metrics = compute_metrics(out.run, s, config);
  return out;
}

std::vector<double> clearance_trace(const RunResult& run, const Scenario& s) {
  std::vector<double> trace;
  trace.reserve(run.full_trajectory.states.size());
  for (std::size_t i = 0; i < run.full_trajectory.states.size(); ++i)
    trace.push_back(surface_clearance(s, position_of(run.full_trajectory.states[i]),
                                      static_cast<double>(i) * s.h));
  return trace;
}

BatchResult batch(const std::vector<std::uint64_t>& seeds, const GenerationParams& params,
                  const SimConfig& config) {
  std::vector<SeedOutcome> outcomes(seeds.size());
  std::exception_ptr first_error = nullptr;
  const int n = static_cast<int>(seeds.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      outcomes[static_cast<std::size_t>(i)] =
          run_seed(seeds[static_cast<std::size_t>(i)], params, config);
    } catch (...) {
#pragma omp critical
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return assemble(std::move(outcomes));
}

BatchResult batch_serial(const std::vector<std::uint64_t>& seeds,
                         const GenerationParams& params, const SimConfig& config) {
  std::vector<SeedOutcome> outcomes;
  outcomes.reserve(seeds.size());
  for (std::uint64_t seed : seeds) outcomes.push_back(run_seed(seed, params, config));
  return assemble(std::move(outcomes));
}

}  // namespace ccp
