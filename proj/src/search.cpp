#include "ccp/search.hpp"

#include <cmath>

namespace ccp {
namespace {

// Fold one ball into the report: earliest entry time of the ray
// offset + v * tau into a ball of the given radius centered at the origin.
void absorb_entry(const Vec2& offset, const Vec2& v, double radius, double t_w,
                  SafetyReport& rep) {
  const double c = offset.squaredNorm() - radius * radius;
  if (c <= 0.0) {  // already inside (or on) the ball
    rep.not_safe = true;
    rep.min_Ts = 0.0;
    return;
  }
  const double a = v.squaredNorm();
  if (a < 1e-18) return;  // no relative motion: gap never closes
  const double b = 2.0 * offset.dot(v);
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return;  // ray misses the ball
  const double entry = (-b - std::sqrt(disc)) / (2.0 * a);
  if (entry >= 0.0 && entry <= t_w && entry < rep.min_Ts) {
    rep.not_safe = true;
    rep.min_Ts = entry;
  }
}

}  // namespace

SafetyReport compute_safety(const Vec4& state, const std::vector<Ball>& balls, double t_w) {
  SafetyReport rep;
  const Vec2 q = position_of(state);
  const Vec2 v = state.tail<2>();
  for (const auto& ball : balls) {
    absorb_entry(q - ball.center, v, ball.radius, t_w, rep);
    if (rep.min_Ts == 0.0) break;
  }
  return rep;
}

SafetyReport compute_safety(const Vec4& state, const Scenario& s, double t_now, double t_w) {
  SafetyReport rep;
  const Vec2 q = position_of(state);
  const Vec2 v = state.tail<2>();
  for (const auto& ob : s.obstacles) {
    const Vec2 c_now = ob.center_at(t_now);
    Vec2 v_rel = v;
    if (ob.is_moving()) v_rel -= (ob.center_at(t_now + s.h) - c_now) / s.h;
    absorb_entry(q - c_now, v_rel, ob.radius, t_w, rep);
    if (rep.min_Ts == 0.0) break;
  }
  return rep;
}

}  // namespace ccp
