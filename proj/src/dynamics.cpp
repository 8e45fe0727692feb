#include "ccp/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace ccp {

Vec4 Model::f_a(const Vec4& z) const {
  switch (kind) {
    case Kind::DoubleIntegrator:
      return Vec4(z(2), z(3), 0.0, 0.0);
    case Kind::Unicycle:
      return Vec4(z(3) * std::cos(z(2)), z(3) * std::sin(z(2)), 0.0, 0.0);
  }
  return Vec4::Zero();
}

Mat42 Model::f_b(const Vec4& z) const {
  (void)z;
  Mat42 b = Mat42::Zero();
  switch (kind) {
    case Kind::DoubleIntegrator:
      b(2, 0) = 1.0;
      b(3, 1) = 1.0;
      break;
    case Kind::Unicycle:
      // u = (a, omega): vdot = a, thetadot = omega.
      b(3, 0) = 1.0;
      b(2, 1) = 1.0;
      break;
  }
  return b;
}

Mat4 Model::f_jacobian(const Vec4& z) const {
  Mat4 j = Mat4::Zero();
  switch (kind) {
    case Kind::DoubleIntegrator:
      j(0, 2) = 1.0;
      j(1, 3) = 1.0;
      break;
    case Kind::Unicycle: {
      const double th = z(2), v = z(3);
      j(0, 2) = -v * std::sin(th);
      j(0, 3) = std::cos(th);
      j(1, 2) = v * std::cos(th);
      j(1, 3) = std::sin(th);
      break;
    }
  }
  return j;
}

Vec4 discretize_exact(const Model& m, const Vec4& z, const Vec2& u, double h) {
  return z + h * (m.f_a(z) + m.f_b(z) * u);
}

AffineDynamics linearize(const Model& m, const Vec4& z0, double h) {
  const Mat42 fb = m.f_b(z0);
  // Both columns must survive: the strict-problem recovery relies on controls
  // being readable back from consecutive states.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(fb);
  if (svd.singularValues().minCoeff() < 1e-9)
    throw std::runtime_error("linearize: rank-deficient input map f_b");

  const Mat4 j = m.f_jacobian(z0);
  AffineDynamics d;
  d.A = Mat4::Identity() + h * j;
  d.B = h * fb;
  d.w = h * (m.f_a(z0) - j * z0);
  return d;
}

std::vector<Vec4> rollout(const Model& m, const Vec4& z0, const std::vector<Vec2>& us,
                          double h) {
  std::vector<Vec4> zs;
  zs.reserve(us.size() + 1);
  zs.push_back(z0);
  for (const auto& u : us) zs.push_back(discretize_exact(m, zs.back(), u, h));
  return zs;
}

std::vector<Vec4> rollout(const AffineDynamics& d, const Vec4& z0,
                          const std::vector<Vec2>& us) {
  std::vector<Vec4> zs;
  zs.reserve(us.size() + 1);
  zs.push_back(z0);
  for (const auto& u : us) zs.push_back(d.step(zs.back(), u));
  return zs;
}

}  // namespace ccp
