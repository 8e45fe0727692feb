#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ccp/dynamics.hpp"
#include "ccp/scenario.hpp"

#include <cmath>

using namespace ccp;

namespace {

// Central finite-difference Jacobian of the continuous field f_c(., u) at z.
Mat4 fd_jacobian(const Model& m, const Vec4& z, const Vec2& u, double eps = 1e-6) {
  Mat4 j;
  for (int c = 0; c < 4; ++c) {
    Vec4 zp = z, zm = z;
    zp(c) += eps;
    zm(c) -= eps;
    const Vec4 fp = m.f_a(zp) + m.f_b(zp) * u;
    const Vec4 fm = m.f_a(zm) + m.f_b(zm) * u;
    j.col(c) = (fp - fm) / (2.0 * eps);
  }
  return j;
}

// Reference flow over one interval h using n Euler substeps.
Vec4 substepped(const Model& m, const Vec4& z, const Vec2& u, double h, int n) {
  Vec4 cur = z;
  for (int i = 0; i < n; ++i) cur = discretize_exact(m, cur, u, h / n);
  return cur;
}

Vec4 random_state(SplitMix64& rng) {
  return Vec4(rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0),
              rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
}

}  // namespace

TEST_CASE("double integrator steps: pure drift and pure acceleration") {
  const Model m = Model::double_integrator();
  // Drift at constant velocity.
  Vec4 z(0.0, 0.0, 2.0, -1.0);
  Vec4 next = discretize_exact(m, z, Vec2::Zero(), 0.25);
  CHECK(next.isApprox(Vec4(0.5, -0.25, 2.0, -1.0)));
  // Acceleration from rest only changes velocity on the first step.
  next = discretize_exact(m, Vec4::Zero(), Vec2(4.0, 0.0), 0.25);
  CHECK(next.isApprox(Vec4(0.0, 0.0, 1.0, 0.0)));
}

TEST_CASE("unicycle step matches a hand evaluation") {
  const Model m = Model::unicycle();
  const double th = 0.3, v = 2.0, h = 0.1;
  Vec4 z(1.0, 2.0, th, v);
  const Vec2 u(0.5, -0.2);  // (accel, turn rate)
  const Vec4 next = discretize_exact(m, z, u, h);
  CHECK(next(0) == doctest::Approx(1.0 + h * v * std::cos(th)));
  CHECK(next(1) == doctest::Approx(2.0 + h * v * std::sin(th)));
  CHECK(next(2) == doctest::Approx(th + h * (-0.2)));
  CHECK(next(3) == doctest::Approx(v + h * 0.5));
}

TEST_CASE("double integrator linearization is exact, state-independent, and has w = 0") {
  const Model m = Model::double_integrator();
  const double h = 0.25;
  const AffineDynamics d = linearize(m, Vec4(3.0, -7.0, 1.0, 2.0), h);

  Mat4 a_expect = Mat4::Identity();
  a_expect(0, 2) = h;
  a_expect(1, 3) = h;
  CHECK(d.A.isApprox(a_expect));
  Mat42 b_expect = Mat42::Zero();
  b_expect(2, 0) = h;
  b_expect(3, 1) = h;
  CHECK(d.B.isApprox(b_expect));
  CHECK(d.w.norm() == 0.0);

  // Same matrices from any linearization point.
  const AffineDynamics d2 = linearize(m, Vec4(-50.0, 9.0, -12.0, 0.5), h);
  CHECK(d2.A == d.A);
  CHECK(d2.B == d.B);
  CHECK(d2.w == d.w);

  // The affine step and the exact step agree everywhere.
  SplitMix64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Vec4 z = random_state(rng);
    const Vec2 u(rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0));
    CHECK((d.step(z, u) - discretize_exact(m, z, u, h)).norm() < 1e-13);
  }
}

TEST_CASE("unicycle Jacobian matches finite differences on 100 random states") {
  const Model m = Model::unicycle();
  SplitMix64 rng(99);
  for (int i = 0; i < 100; ++i) {
    Vec4 z = random_state(rng);
    z(2) = rng.uniform(-3.14, 3.14);
    z(3) = rng.uniform(-4.0, 4.0);
    const Mat4 fd = fd_jacobian(m, z, Vec2::Zero());
    CHECK((m.f_jacobian(z) - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("unicycle linearization reproduces the Euler step to first order at the base point") {
  const Model m = Model::unicycle();
  const double h = 0.25;
  const Vec4 z0(4.0, 1.0, 0.8, 3.0);
  const AffineDynamics d = linearize(m, z0, h);
  // At the linearization point with u = 0 the affine step is exact.
  CHECK((d.step(z0, Vec2::Zero()) - discretize_exact(m, z0, Vec2::Zero(), h)).norm() <
        1e-13);
  // f_b is state-independent, so the control channel is exact too.
  const Vec2 u(1.5, -0.4);
  CHECK((d.step(z0, u) - discretize_exact(m, z0, u, h)).norm() < 1e-13);
  // Nearby states incur only a second-order error.
  const Vec4 dz(0.01, -0.02, 0.015, 0.01);
  const double gap = (d.step(z0 + dz, u) - discretize_exact(m, z0 + dz, u, h)).norm();
  CHECK(gap < 1e-4);
}

TEST_CASE("one-step Euler error against a substepped reference scales as h^2") {
  const Model m = Model::unicycle();
  const Vec4 z0(0.0, 0.0, 0.4, 2.5);
  const Vec2 u(1.0, 0.8);
  std::vector<double> hs = {0.2, 0.1, 0.05, 0.025};
  std::vector<double> errs;
  for (double h : hs)
    errs.push_back((discretize_exact(m, z0, u, h) - substepped(m, z0, u, h, 100)).norm());
  // Log-log slope via least squares.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = static_cast<int>(hs.size());
  for (int i = 0; i < n; ++i) {
    const double x = std::log(hs[i]), y = std::log(errs[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("rollouts chain steps and keep N+1 states") {
  const Model m = Model::double_integrator();
  std::vector<Vec2> us = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, -1.0}};
  const auto zs = rollout(m, Vec4::Zero(), us, 0.5);
  REQUIRE(zs.size() == 4);
  for (std::size_t i = 0; i + 1 < zs.size(); ++i)
    CHECK((zs[i + 1] - discretize_exact(m, zs[i], us[i], 0.5)).norm() == 0.0);

  const AffineDynamics d = linearize(m, Vec4::Zero(), 0.5);
  const auto za = rollout(d, Vec4::Zero(), us);
  REQUIRE(za.size() == 4);
  for (std::size_t i = 0; i < zs.size(); ++i) CHECK((za[i] - zs[i]).norm() < 1e-13);
}

TEST_CASE("rollout with an empty control list returns just the start") {
  const auto zs = rollout(Model::unicycle(), Vec4(1, 2, 3, 4), {}, 0.25);
  REQUIRE(zs.size() == 1);
  CHECK(zs[0] == Vec4(1, 2, 3, 4));
}

TEST_CASE("linearization is deterministic") {
  const Model m = Model::unicycle();
  const Vec4 z0(2.0, -1.0, 1.2, 4.0);
  const AffineDynamics a = linearize(m, z0, 0.25);
  const AffineDynamics b = linearize(m, z0, 0.25);
  CHECK(a.A == b.A);
  CHECK(a.B == b.B);
  CHECK(a.w == b.w);
}
