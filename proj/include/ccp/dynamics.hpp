#pragma once

#include "ccp/types.hpp"

namespace ccp {

/// Control-affine model f_c(z, u) = f_a(z) + f_b(z) u with a 4-dimensional
/// state and 2-dimensional control.
///
/// DoubleIntegrator: z = (x, y, vx, vy), u = (ax, ay).
/// Unicycle:         z = (x, y, theta, v), u = (a, omega);
///                   xdot = v cos(theta), ydot = v sin(theta).
struct Model {
  enum class Kind { DoubleIntegrator, Unicycle };
  Kind kind = Kind::DoubleIntegrator;

  static Model double_integrator() { return {Kind::DoubleIntegrator}; }
  static Model unicycle() { return {Kind::Unicycle}; }

  Vec4 f_a(const Vec4& z) const;
  Mat42 f_b(const Vec4& z) const;
  /// Jacobian of f_c with respect to z at u = 0 (f_b is state-independent
  /// for both models, so this is also the Jacobian of f_a).
  Mat4 f_jacobian(const Vec4& z) const;
};

/// One-step discrete dynamics z_{i+1} = A z_i + B u_i + w.
struct AffineDynamics {
  Mat4 A = Mat4::Identity();
  Mat42 B = Mat42::Zero();
  Vec4 w = Vec4::Zero();

  Vec4 step(const Vec4& z, const Vec2& u) const { return A * z + B * u + w; }
};

/// Forward-Euler step z + h f_c(z, u).
Vec4 discretize_exact(const Model& m, const Vec4& z, const Vec2& u, double h);

/// First-order expansion of the Euler step around (z0, u = 0):
///   A = I + h J(z0),  B = h f_b(z0),  w = h (f_a(z0) - J(z0) z0).
/// For the double integrator this is exact and state-independent with w = 0.
/// Throws std::runtime_error if f_b(z0) loses column rank (no such state
/// exists for the built-in models; the check guards future ones).
AffineDynamics linearize(const Model& m, const Vec4& z0, double h);

/// Nonlinear rollout: repeated discretize_exact. Returns N+1 states.
std::vector<Vec4> rollout(const Model& m, const Vec4& z0, const std::vector<Vec2>& us,
                          double h);

/// Affine rollout through fixed (A, B, w). Returns N+1 states.
std::vector<Vec4> rollout(const AffineDynamics& d, const Vec4& z0,
                          const std::vector<Vec2>& us);

}  // namespace ccp
