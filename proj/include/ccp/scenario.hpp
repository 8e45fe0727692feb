#pragma once

#include "ccp/types.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ccp {

/// splitmix64: tiny, portable, seedable generator so maps and obstacle paths
/// reproduce bit-for-bit across platforms. Constants are the ones from the
/// reference implementation by Sebastiano Vigna (public domain).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

struct StaticMotion {};

/// Bounded random walk. Each step draws an acceleration uniformly from the
/// disk of radius accel_cap, rejecting draws that would push the speed above
/// max_speed, then updates velocity and position in that order. `step` is the
/// integration interval; the path is a pure function of this record.
struct RandomWalkMotion {
  double max_speed = 0.0;
  double accel_cap = 0.0;
  std::uint64_t seed = 0;
  double step = 0.25;
};

struct Obstacle {
  int id = 0;
  Vec2 center = Vec2::Zero();
  double radius = 1.0;
  std::variant<StaticMotion, RandomWalkMotion> motion = StaticMotion{};

  bool is_moving() const { return std::holds_alternative<RandomWalkMotion>(motion); }

  /// Center at absolute time t. Piecewise linear: full walk steps followed by
  /// constant-velocity interpolation over the fractional remainder, so the
  /// path is max_speed-Lipschitz in t. t <= 0 returns the initial center.
  Vec2 center_at(double t) const;
};

/// Ball snapshot used by planning-side geometry (one fixed instant).
struct Ball {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
};

struct Scenario {
  std::vector<Obstacle> obstacles;
  Vec4 z0 = Vec4::Zero();
  Vec4 zf = Vec4::Zero();
  double gamma = 3.0;      ///< terminal acceptance radius in the Q0 norm
  double clearance = 7.0;  ///< guaranteed surface-to-surface gap between obstacles
  double v_max = 12.0;
  double a_max = 20.0;
  double h = 0.25;  ///< control interval
  int N_min = 4;
  int N_max = 25;
  Mat4 Q0 = Mat4::Identity();
  Mat4 Q1 = Mat4::Zero();
  Mat2 Q2 = Mat2::Zero();

  bool has_moving_obstacles() const;
  std::vector<Ball> balls_at(double t) const;
};

/// Velocity-limit weight: speed rows carry 1/v_max^2 and the position rows a
/// tiny epsilon that keeps the matrix positive definite without measurably
/// tightening the speed bound at map scale.
Mat4 default_Q1(double v_max);

/// Control-limit weight I / a_max^2.
Mat2 default_Q2(double a_max);

/// Smallest surface distance from pos to any ball at time t (negative inside
/// a ball, +infinity when the map has no obstacles).
double surface_clearance(const Scenario& s, const Vec2& pos, double t);

struct GenerationParams {
  int n_obstacles = 20;
  double r_min = 3.0;
  double r_max = 11.0;
  double clearance = 7.0;
  Vec2 bounds_lo = Vec2(0.0, 0.0);
  Vec2 bounds_hi = Vec2(170.0, 170.0);
  Vec4 z0 = Vec4::Zero();
  Vec4 zf = (Vec4() << 160.0, 160.0, 0.0, 0.0).finished();
  double gamma = 3.0;
  double v_max = 12.0;
  double a_max = 20.0;
  double h = 0.25;
  int N_min = 4;
  int N_max = 25;
  bool moving = false;
  double obstacle_max_speed = 0.0;
  double obstacle_accel_cap = 0.0;  ///< 0 selects max_speed (full stop/start within 1 s)
  int max_attempts_per_obstacle = 500;
  int max_map_attempts = 50;
};

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationIssue {
  enum class Kind {
    BadParams,           ///< non-positive step/limits, horizon bounds out of order
    BadWeights,          ///< Q0/Q1/Q2 not symmetric positive definite
    EndpointInsideBall,  ///< start or goal position not strictly outside a ball
    ClearanceViolated,   ///< a pair of balls closer than the declared gap
    Unreachable,         ///< coarse grid search finds no start-to-goal path
  };
  Kind kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

/// Rejection-samples a map satisfying the placement contract: endpoints
/// strictly outside every ball (with extra clearance/2 margin so the start
/// and goal stay plannable), pairwise surface gaps above `clearance`, and a
/// coarse start-to-goal reachability check. Deterministic in (params, seed).
/// Throws GenerationError when the attempt budget runs out.
Scenario generate_scenario(const GenerationParams& params, std::uint64_t seed);

/// Checks the invariants generate_scenario promises, plus weight/parameter
/// sanity, on an arbitrary (possibly hand-written) scenario.
ValidationReport validate_scenario(const Scenario& s);

}  // namespace ccp
