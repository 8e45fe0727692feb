#include "ccp/cvapf.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace ccp {
namespace {

double clearance_of(const Vec2& pos, const std::vector<Ball>& balls) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : balls) best = std::min(best, (pos - b.center).norm() - b.radius);
  return best;
}

}  // namespace

FieldParams FieldParams::defaults_for(const Scenario& s) {
  FieldParams p;
  p.a0 = 0.6 * s.a_max;
  p.a1 = 0.4 * s.a_max;
  return p;
}

Vec2 attractive_gradient(const Vec2& pos, const Vec2& zf_pos) {
  return 2.0 * (pos - zf_pos);
}

Vec2 repulsive_gradient(const Vec2& pos, const std::vector<Ball>& balls, double zeta,
                        double beta) {
  Vec2 grad = Vec2::Zero();
  for (const auto& b : balls) {
    const Vec2 diff = pos - b.center;
    const double dist = diff.norm();
    if (dist < 1e-12) continue;  // center singularity: contribution defined as 0
    const double value = zeta * std::exp(-beta * (dist - b.radius) / b.radius);
    grad += value * (-beta / b.radius) * (diff / dist);
  }
  return grad;
}

Vec2 vortex_direction(const Vec2& pos, const std::vector<Ball>& balls, const Vec2& target_pos,
                      double zeta, double beta) {
  const Vec2 to_target = target_pos - pos;
  const Vec2 grad = repulsive_gradient(pos, balls, zeta, beta);
  const double gn = grad.norm();
  if (gn < 1e-12) {
    const double tn = to_target.norm();
    return tn < 1e-12 ? Vec2(1.0, 0.0) : Vec2(to_target / tn);
  }
  const Vec2 left(-grad.y() / gn, grad.x() / gn);
  return to_target.dot(left) >= to_target.dot(-left) ? left : Vec2(-left);
}

std::optional<Vec2> total_field_direction(const Vec2& pos, const std::vector<Ball>& balls,
                                          const Vec2& target_pos, double zeta, double beta,
                                          double zeta_v) {
  Vec2 field = -(attractive_gradient(pos, target_pos) +
                 repulsive_gradient(pos, balls, zeta, beta));
  if (zeta_v > 0.0)
    field += zeta_v * vortex_direction(pos, balls, target_pos, zeta, beta);
  const double norm = field.norm();
  if (norm < 1e-12) return std::nullopt;
  return Vec2(field / norm);
}

std::optional<double> speed_search(const Vec2& direction, const Vec2& current_velocity,
                                   const SpeedSearchLimits& lim,
                                   const std::function<bool(const Vec2&)>& velocity_ok,
                                   int speed_steps) {
  for (int k = 0; k <= speed_steps; ++k) {
    const double s = lim.v_max * (1.0 - static_cast<double>(k) / speed_steps);
    const Vec2 vel = s * direction;
    if ((vel - current_velocity).norm() > lim.a_max * lim.h + 1e-12) continue;
    Vec4 state;
    state << lim.pos, vel;
    if (quad_form(lim.Q1, state) > 1.0 + 1e-12) continue;
    if (!velocity_ok(vel)) continue;
    return s;
  }
  return std::nullopt;
}

Vec2 safe_acceleration(const Vec2& field_direction, const Vec2& current_velocity, double a0,
                       double a1) {
  const double vn = current_velocity.norm();
  if (vn < 1e-12) return a1 * field_direction;
  return a1 * field_direction - a0 * (current_velocity / vn);
}

SearchResult run_cvapf(const Vec4& z0, const Scenario& s, const FieldParams& params,
                       double t_start, const std::optional<AffineDynamics>& dyn) {
  if (params.zeta <= 0.0 || params.beta <= 0.0 || params.zeta_v0 < 0.0)
    throw std::invalid_argument("run_cvapf: field weights out of range");
  if (params.a0 + params.a1 > s.a_max + 1e-9)
    throw std::invalid_argument("run_cvapf: a0 + a1 must not exceed a_max");
  if (params.speed_steps < 1) throw std::invalid_argument("run_cvapf: speed_steps < 1");

  const Vec2 target = position_of(s.zf);
  const double h = s.h;
  SplitMix64 rng(0x7a95f3c1d2e4b687ULL);  // deterministic degenerate-field nudges

  SearchResult res;
  res.trajectory.states.push_back(z0);
  res.min_Ts = compute_safety(z0, s, t_start, params.t_w).min_Ts;

  bool not_safe = true;
  bool knot_collided = false;
  int N = 0;
  while ((N < s.N_min || not_safe) && N < s.N_max) {
    const Vec4& prev = res.trajectory.states.back();
    const double t_next = t_start + (N + 1) * h;
    const std::vector<Ball> balls = s.balls_at(t_next);

    const Vec2 pos_next = position_of(prev) + h * prev.tail<2>();

    // Field direction at the new position; a vanishing field (saddle between
    // potentials) is escaped by a tiny seeded positional nudge.
    const double zeta_v =
        clearance_of(pos_next, balls) < params.activation_dist ? params.zeta_v0 : 0.0;
    std::optional<Vec2> dir;
    Vec2 eval_pos = pos_next;
    for (int attempt = 0; attempt < 8 && !dir; ++attempt) {
      dir = total_field_direction(eval_pos, balls, target, params.zeta, params.beta, zeta_v);
      if (!dir) {
        const double ang = 2.0 * M_PI * rng.uniform();
        eval_pos = pos_next + 1e-6 * Vec2(std::cos(ang), std::sin(ang));
      }
    }
    if (!dir) {
      const Vec2 to_target = target - pos_next;
      dir = to_target.norm() < 1e-12 ? Vec2(1.0, 0.0) : Vec2(to_target.normalized());
    }

    SpeedSearchLimits lim;
    lim.pos = pos_next;
    lim.v_max = s.v_max;
    lim.a_max = s.a_max;
    lim.h = h;
    lim.Q1 = s.Q1;
    const auto velocity_ok = [&](const Vec2& vel) {
      Vec4 cand;
      cand << pos_next, vel;
      return !compute_safety(cand, s, t_next, params.t_w).not_safe;
    };

    Vec2 vel_next;
    const std::optional<double> speed =
        speed_search(*dir, prev.tail<2>(), lim, velocity_ok, params.speed_steps);
    if (speed) {
      vel_next = *speed * *dir;
    } else {
      const Vec2 brake = safe_acceleration(*dir, prev.tail<2>(), params.a0, params.a1);
      vel_next = prev.tail<2>() + h * brake;
      // Unlike the scanned speeds, the steered brake is not collision
      // checked. If it would carry the next knot inside a ball, brake as
      // hard as the control cap allows along the current heading instead;
      // keep whichever endpoint clears better.
      const std::vector<Ball> balls_ahead = s.balls_at(t_next + h);
      if (clearance_of(pos_next + h * vel_next, balls_ahead) < 0.0) {
        const Vec2 v_prev = prev.tail<2>();
        const double vn = v_prev.norm();
        const Vec2 hard =
            vn <= s.a_max * h ? Vec2(Vec2::Zero()) : Vec2(v_prev * (1.0 - s.a_max * h / vn));
        if (clearance_of(pos_next + h * hard, balls_ahead) >
            clearance_of(pos_next + h * vel_next, balls_ahead))
          vel_next = hard;
      }
    }

    Vec4 knot;
    knot << pos_next, vel_next;
    res.trajectory.states.push_back(knot);

    const SafetyReport rep = compute_safety(knot, s, t_next, params.t_w);
    not_safe = rep.not_safe;
    res.min_Ts = std::min(res.min_Ts, rep.min_Ts);
    ++N;

    if (getenv("CCP_TRACE2")) {
      fprintf(stderr,
              "SR N=%d pos=(%.3f,%.3f) vel=(%.3f,%.3f)|%.3f| clr=%.4f spd=%d "
              "minTs=%.3f notsafe=%d dir=(%.3f,%.3f) zv=%g\n",
              N, pos_next.x(), pos_next.y(), vel_next.x(), vel_next.y(), vel_next.norm(),
              clearance_of(pos_next, balls), speed.has_value(), rep.min_Ts, rep.not_safe,
              dir->x(), dir->y(), zeta_v);
    }

    if (clearance_of(pos_next, balls) < -1e-9) {
      knot_collided = true;  // a placed knot can never be unplaced: hopeless
      break;
    }
  }

  res.N = N;
  res.not_safe = not_safe;
  res.failed = not_safe || knot_collided;
  if (knot_collided) {
    res.note = "knot entered an obstacle";
    return res;
  }
  if (res.failed) {
    res.note = "no safe terminal state within the horizon cap";
    return res;
  }

  // Reconstruct controls against the one-step affine map and re-verify every
  // invariant the downstream layers rely on.
  const AffineDynamics map =
      dyn ? *dyn : linearize(Model::double_integrator(), z0, h);
  const Eigen::CompleteOrthogonalDecomposition<Mat42> b_solver(map.B);
  for (int i = 0; i < N; ++i) {
    const Vec4 rhs = res.trajectory.states[i + 1] - map.A * res.trajectory.states[i] - map.w;
    const Vec2 u = b_solver.solve(rhs);
    if ((map.B * u - rhs).cwiseAbs().maxCoeff() > 1e-6) {
      res.failed = true;
      res.note = "control reconstruction residual too large";
      return res;
    }
    res.trajectory.controls.push_back(u);
  }

  for (int i = 0; i <= N; ++i) {
    const Vec4& z = res.trajectory.states[i];
    const double t_i = t_start + i * h;
    if (clearance_of(position_of(z), s.balls_at(t_i)) < -1e-9) {
      res.failed = true;
      res.note = "knot collision in post-check";
      return res;
    }
    if (quad_form(s.Q1, z) > 1.0 + 1e-9) {
      res.failed = true;
      res.note = "state limit violated in post-check";
      return res;
    }
  }
  for (const Vec2& u : res.trajectory.controls) {
    if (quad_form(s.Q2, u) > 1.0 + 1e-9) {
      res.failed = true;
      res.note = "control limit violated in post-check";
      return res;
    }
  }
  return res;
}

}  // namespace ccp
