#pragma once

#include <Eigen/Dense>

#include <vector>

namespace ccp {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using Mat42 = Eigen::Matrix<double, 4, 2>;

/// Knot-indexed state/control sequence. states.size() == controls.size() + 1
/// whenever both are populated: control i acts between knots i and i+1.
struct Trajectory {
  std::vector<Vec4> states;
  std::vector<Vec2> controls;

  int steps() const { return static_cast<int>(controls.size()); }
  const Vec4& front() const { return states.front(); }
  const Vec4& back() const { return states.back(); }
};

/// Position block of a state. Both supported models keep (x, y) in the
/// leading two components.
inline Vec2 position_of(const Vec4& z) { return z.head<2>(); }

/// Weighted squared norm x' Q x.
template <typename M, typename V>
double quad_form(const M& Q, const V& x) {
  return x.dot(Q * x);
}

}  // namespace ccp
