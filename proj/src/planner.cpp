#include "ccp/planner.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <ostream>
#include <sstream>

namespace ccp {

namespace {

double weighted_distance(const Mat4& Q, const Vec4& a, const Vec4& b) {
  return std::sqrt(std::max(0.0, quad_form(Q, Vec4(a - b))));
}

double resolve_rho_max(const Scenario& s, double requested) {
  const Eigen::SelfAdjointEigenSolver<Mat4> es(s.Q0);
  const double bound = 1e-3 * es.eigenvalues().minCoeff();
  if (requested < 0.0) return bound;
  return std::min(requested, bound);
}

void log_cycle(std::ostream* os, int k, const SearchResult& search, const CycleResult& res,
               int nhat, double terminal, double search_wait_s) {
  if (!os) return;
  std::ostringstream line;
  line.precision(10);
  line << "cycle=" << k << " N=" << res.N << " nhat=" << nhat << " rho=" << res.rho_used
       << " min_Ts=" << search.min_Ts << " relaxed=" << to_string(res.diagnostics.relaxed_status)
       << " strict=" << to_string(res.diagnostics.strict_status)
       << " relaxed_obj=" << res.relaxed_objective << " strict_obj=" << res.strict_objective
       << " certified=" << (res.local_optimum_certified ? 1 : 0) << " terminal=" << terminal
       << " min_clearance=" << res.diagnostics.min_clearance
       << " search_wait_s=" << search_wait_s << " relaxed_s=" << res.diagnostics.relaxed_solve_s
       << " strict_s=" << res.diagnostics.strict_solve_s;
  *os << line.str() << '\n';
}

void log_summary(std::ostream* os, const RunResult& r) {
  if (!os) return;
  std::ostringstream line;
  line.precision(10);
  line << "run: success=" << (r.success ? 1 : 0) << " cycles=" << r.cycles.size()
       << " t_f=" << r.t_f;
  if (r.failure_reason) line << " reason=" << to_string(*r.failure_reason);
  if (!r.failure_note.empty()) line << " note=\"" << r.failure_note << '"';
  *os << line.str() << '\n';
}

RunResult fail(RunResult&& r, RunResult::FailureReason why, std::string note,
               std::ostream* os, double t_f) {
  r.success = false;
  r.t_f = t_f;
  r.failure_reason = why;
  r.failure_note = std::move(note);
  log_summary(os, r);
  return std::move(r);
}

/// Appends the first `m` steps of `t` to the concatenated result.
void append_prefix(Trajectory& out, const Trajectory& t, int m) {
  for (int i = 1; i <= m; ++i) out.states.push_back(t.states[static_cast<std::size_t>(i)]);
  for (int i = 0; i < m; ++i) out.controls.push_back(t.controls[static_cast<std::size_t>(i)]);
}

}  // namespace

const char* to_string(RunResult::FailureReason r) {
  switch (r) {
    case RunResult::FailureReason::SearchFailed: return "search-failed";
    case RunResult::FailureReason::Infeasible: return "infeasible";
    case RunResult::FailureReason::ConstraintViolation: return "constraint-violation";
    case RunResult::FailureReason::CycleLimit: return "cycle-limit";
  }
  return "unknown";
}

int adjust_horizon(const Trajectory& trajectory, const Scenario& s, double margin) {
  const int N = trajectory.steps();
  if (N < 3) return 1;
  const auto interior = [&](int idx) {
    return quad_form(s.Q2, trajectory.controls[static_cast<std::size_t>(idx)]) <= 1.0 - margin;
  };
  for (int m = std::min(s.N_max, N - 2); m >= 1; --m)
    if (interior(m - 1) && interior(m)) return m;
  return std::max(1, N / 2);
}

double update_rho(double min_Ts, double t_w, double rho_max) {
  if (std::isinf(min_Ts)) return 0.0;
  const double frac = std::clamp(min_Ts / t_w, 0.0, 1.0);
  return rho_max * (1.0 - frac);
}

RunResult run(const Scenario& s, const PlannerConfig& config) {
  validate_scenario(s);
  const double rho_max = resolve_rho_max(s, config.rho_max);
  const FieldParams fparams = config.field.value_or(FieldParams::defaults_for(s));
  const double t_w = config.backend == PlannerConfig::Backend::CVAPF ? fparams.t_w
                                                                     : config.dwa.t_w;

  const auto do_search = [&](const Vec4& z, double t,
                             const AffineDynamics& dyn) -> SearchResult {
    if (config.backend == PlannerConfig::Backend::CVAPF)
      return run_cvapf(z, s, fparams, t, dyn);
    return run_cdwa(z, s, config.model, config.dwa, t);
  };

  RunResult r;
  r.full_trajectory.states.push_back(s.z0);

  Vec4 z = s.z0;
  int total_applied = 0;
  bool reached = false;
  AffineDynamics dyn = linearize(config.model, z, s.h);
  std::future<SearchResult> pending;

  for (int k = 0; k < config.cycle_limit; ++k) {
    const double t_now = total_applied * s.h;
    const auto wait_begin = std::chrono::steady_clock::now();
    const SearchResult search = pending.valid() ? pending.get() : do_search(z, t_now, dyn);
    const double search_wait_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wait_begin).count();

    if (search.failed)
      return fail(std::move(r), RunResult::FailureReason::SearchFailed, search.note,
                  config.log, total_applied * s.h);

    double rho = update_rho(search.min_Ts, t_w, rho_max);
    CycleOutcome out =
        solve_cycle(z, search.trajectory, dyn, s, rho, t_now, config.solver, config.cycle);
    if (out.status == CycleOutcome::Status::StrictNotOptimal &&
        out.strict.status == Solution::Status::Infeasible) {
      // The corridor can be connectively infeasible at a small safety weight;
      // one retry with a stronger pull toward the searched side.
      const double retry = rho > 0.0 ? std::min(2.0 * rho, rho_max) : 0.25 * rho_max;
      if (retry > rho) {
        rho = retry;
        out = solve_cycle(z, search.trajectory, dyn, s, rho, t_now, config.solver,
                          config.cycle);
      }
    }

    if (out.status != CycleOutcome::Status::Ok) {
      const std::string note = std::string(to_string(out.status)) +
                               " (relaxed: " + to_string(out.relaxed.status) +
                               ", strict: " + to_string(out.strict.status) + ")";
      const auto why = out.status == CycleOutcome::Status::RecoveryMismatch
                           ? RunResult::FailureReason::ConstraintViolation
                           : RunResult::FailureReason::Infeasible;
      return fail(std::move(r), why, note, config.log, total_applied * s.h);
    }

    const CycleResult& res = out.result;
    if (!r.objective_history.empty() && res.strict_objective >= r.objective_history.back())
      ++r.non_contracting;
    r.objective_history.push_back(res.strict_objective);
    r.min_Ts.push_back(search.min_Ts);
    r.cycles.push_back(res);
    r.cycle_compute_s.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wait_begin).count());

    const double terminal = weighted_distance(s.Q0, res.trajectory.back(), s.zf);
    if (terminal <= s.gamma) {
      append_prefix(r.full_trajectory, res.trajectory, res.N);
      r.applied.push_back(res.N);
      total_applied += res.N;
      reached = true;
      log_cycle(config.log, k, search, res, res.N, terminal, search_wait_s);
      break;
    }

    const int nhat = adjust_horizon(res.trajectory, s, config.junction_margin);
    const Vec4 z_next = res.trajectory.states[static_cast<std::size_t>(nhat)];
    const AffineDynamics dyn_next = linearize(config.model, z_next, s.h);
    if (config.pipelined)
      pending = std::async(std::launch::async, do_search, z_next,
                           (total_applied + nhat) * s.h, dyn_next);

    append_prefix(r.full_trajectory, res.trajectory, nhat);
    r.applied.push_back(nhat);
    total_applied += nhat;
    z = z_next;
    dyn = dyn_next;
    log_cycle(config.log, k, search, res, nhat, terminal, search_wait_s);
  }

  r.t_f = total_applied * s.h;
  if (!reached)
    return fail(std::move(r), RunResult::FailureReason::CycleLimit,
                "no terminal cycle within the cycle limit", config.log, r.t_f);

  // Post-hoc audit: the loop's bookkeeping must agree with the scenario.
  if (weighted_distance(s.Q0, r.full_trajectory.back(), s.zf) > s.gamma + 1e-9)
    return fail(std::move(r), RunResult::FailureReason::ConstraintViolation,
                "terminal state outside the target set", config.log, r.t_f);
  for (std::size_t i = 0; i < r.full_trajectory.states.size(); ++i)
    if (surface_clearance(s, position_of(r.full_trajectory.states[i]),
                          static_cast<double>(i) * s.h) < -1e-6)
      return fail(std::move(r), RunResult::FailureReason::ConstraintViolation,
                  "knot " + std::to_string(i) + " intersects an obstacle", config.log,
                  r.t_f);

  r.success = true;
  log_summary(config.log, r);
  return r;
}

}  // namespace ccp
