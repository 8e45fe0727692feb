#include "ccp/cdwa.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ccp {
namespace {

double clearance_of(const Vec2& pos, const std::vector<Ball>& balls) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : balls) best = std::min(best, (pos - b.center).norm() - b.radius);
  return best;
}

// Planar velocity of a state under the given model; the coasting safety ray
// needs actual ground velocity, not raw state tail entries.
Vec2 planar_velocity(const Model& model, const Vec4& z) {
  if (model.kind == Model::Kind::DoubleIntegrator) return z.tail<2>();
  return Vec2(z(3) * std::cos(z(2)), z(3) * std::sin(z(2)));
}

Vec4 coast_state(const Model& model, const Vec4& z) {
  Vec4 c;
  c << position_of(z), planar_velocity(model, z);
  return c;
}

}  // namespace

std::vector<Vec2> dynamic_window(const Vec4& state, const Model& model, const Scenario& s,
                                 int accel_grid) {
  const Mat2 q2inv = s.Q2.inverse();
  const double half_u0 = std::sqrt(std::max(q2inv(0, 0), 0.0));
  const double half_u1 = std::sqrt(std::max(q2inv(1, 1), 0.0));

  std::vector<Vec2> admissible;  // passes the control bound
  std::vector<Vec2> window;      // additionally keeps the next state in bounds
  for (int i = 0; i < accel_grid; ++i) {
    for (int j = 0; j < accel_grid; ++j) {
      const Vec2 u(half_u0 * (2.0 * i / (accel_grid - 1) - 1.0),
                   half_u1 * (2.0 * j / (accel_grid - 1) - 1.0));
      if (quad_form(s.Q2, u) > 1.0 + 1e-12) continue;
      admissible.push_back(u);
      const Vec4 next = discretize_exact(model, state, u, s.h);
      if (quad_form(s.Q1, next) <= 1.0 + 1e-12) window.push_back(u);
    }
  }
  if (!window.empty()) return window;

  // Boundary fallback: nothing keeps the state inside its ellipsoid, so
  // return the single least-violating control.
  if (admissible.empty()) return {Vec2::Zero()};
  std::size_t best = 0;
  double best_violation = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < admissible.size(); ++k) {
    const Vec4 next = discretize_exact(model, state, admissible[k], s.h);
    const double violation = quad_form(s.Q1, next);
    if (violation < best_violation) {
      best_violation = violation;
      best = k;
    }
  }
  return {admissible[best]};
}

int evaluate_candidates(const std::vector<Vec2>& candidates, const Vec4& state,
                        const Model& model, const Scenario& s, const Vec2& target_pos,
                        double t_now, const DwaParams& params) {
  // Under the one-step map the successor position depends only on the current
  // state, so candidates are ranked by the displacement they induce from that
  // shared successor: its velocity direction (heading), the clearance of the
  // position it leads to, and its speed.
  const std::vector<Ball> balls_next = s.balls_at(t_now + s.h);
  const std::vector<Ball> balls_look = s.balls_at(t_now + 2.0 * s.h);

  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const Vec4 next = discretize_exact(model, state, candidates[k], s.h);
    const Vec2 pos_next = position_of(next);
    if (clearance_of(pos_next, balls_next) < 0.0) continue;

    const Vec2 induced_velocity = planar_velocity(model, next);
    const Vec2 look_pos = pos_next + s.h * induced_velocity;
    const double clearance = clearance_of(look_pos, balls_look);
    if (clearance < 0.0) continue;

    const Vec2 to_target = target_pos - pos_next;
    double heading = 0.0;
    if (induced_velocity.norm() > 1e-12 && to_target.norm() > 1e-12)
      heading = induced_velocity.dot(to_target) / (induced_velocity.norm() * to_target.norm());

    const double score = params.w_heading * heading +
                         params.w_clearance * std::min(1.0, clearance / params.activation_dist) +
                         params.w_speed * (induced_velocity.norm() / s.v_max);
    if (score > best_score) {  // strict: equal scores keep the lower index
      best_score = score;
      best = static_cast<int>(k);
    }
  }
  return best;
}

SearchResult run_cdwa(const Vec4& z0, const Scenario& s, const Model& model,
                      const DwaParams& params, double t_start) {
  if (params.accel_grid < 3) throw std::invalid_argument("run_cdwa: accel_grid < 3");
  if (params.w_heading < 0.0 || params.w_clearance < 0.0 || params.w_speed < 0.0 ||
      params.w_heading + params.w_clearance + params.w_speed <= 0.0)
    throw std::invalid_argument("run_cdwa: score weights out of range");

  const Vec2 target = position_of(s.zf);
  const double h = s.h;

  SearchResult res;
  res.trajectory.states.push_back(z0);
  res.min_Ts = compute_safety(coast_state(model, z0), s, t_start, params.t_w).min_Ts;

  bool not_safe = true;
  int N = 0;
  while ((N < s.N_min || not_safe) && N < s.N_max) {
    const Vec4 cur = res.trajectory.states.back();
    const double t_cur = t_start + N * h;
    const double t_next = t_cur + h;

    // Threat along the current velocity direction feeds the min_Ts tracker.
    const SafetyReport ahead = compute_safety(coast_state(model, cur), s, t_cur, params.t_w);
    res.min_Ts = std::min(res.min_Ts, ahead.min_Ts);

    const std::vector<Vec2> window = dynamic_window(cur, model, s, params.accel_grid);
    const int pick = evaluate_candidates(window, cur, model, s, target, t_cur, params);
    if (pick < 0) {
      res.N = N;
      res.not_safe = true;
      res.failed = true;
      res.note = "every dynamic-window candidate collides";
      return res;
    }

    const Vec2 u = window[static_cast<std::size_t>(pick)];
    const Vec4 next = discretize_exact(model, cur, u, h);
    res.trajectory.states.push_back(next);
    res.trajectory.controls.push_back(u);

    const SafetyReport rep = compute_safety(coast_state(model, next), s, t_next, params.t_w);
    not_safe = rep.not_safe;
    res.min_Ts = std::min(res.min_Ts, rep.min_Ts);
    ++N;
  }

  res.N = N;
  res.not_safe = not_safe;
  res.failed = not_safe;
  if (res.failed) {
    res.note = "no safe terminal state within the horizon cap";
    return res;
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
