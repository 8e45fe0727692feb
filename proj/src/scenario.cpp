#include "ccp/scenario.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace ccp {
namespace {

// Uniform draw from the closed disk of radius `cap` via square rejection.
Vec2 draw_in_disk(SplitMix64& rng, double cap) {
  if (cap <= 0.0) return Vec2::Zero();
  for (int i = 0; i < 1000; ++i) {
    const Vec2 a(rng.uniform(-cap, cap), rng.uniform(-cap, cap));
    if (a.norm() <= cap) return a;
  }
  return Vec2::Zero();
}

// Acceleration keeping the next speed within max_speed. A zero draw is always
// admissible because the walk never exceeds max_speed, so rejection
// terminates; the fallback brakes along the current velocity.
Vec2 draw_walk_accel(SplitMix64& rng, const Vec2& v, const RandomWalkMotion& m) {
  for (int i = 0; i < 1000; ++i) {
    const Vec2 a = draw_in_disk(rng, m.accel_cap);
    if ((v + m.step * a).norm() <= m.max_speed) return a;
  }
  const double vn = v.norm();
  if (vn < 1e-300) return Vec2::Zero();
  return -(v / vn) * std::min(m.accel_cap, vn / m.step);
}

bool symmetric_pd(const Eigen::MatrixXd& Q, double tol = 1e-12) {
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + Q.cwiseAbs().maxCoeff()))
    return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  return es.eigenvalues().minCoeff() > tol;
}

// Coarse 8-connected grid search between the start and goal positions.
// Cells are blocked when their center lies inside a ball at t = 0. This is a
// screening check, not a planner: resolution is capped so it stays cheap.
bool coarse_reachable(const Scenario& s) {
  const Vec2 a = position_of(s.z0);
  const Vec2 b = position_of(s.zf);
  Vec2 lo = a.cwiseMin(b);
  Vec2 hi = a.cwiseMax(b);
  for (const auto& o : s.obstacles) {
    lo = lo.cwiseMin(o.center - Vec2::Constant(o.radius));
    hi = hi.cwiseMax(o.center + Vec2::Constant(o.radius));
  }
  lo -= Vec2::Constant(2.0);
  hi += Vec2::Constant(2.0);

  const double cell = std::max(0.5, std::min(s.clearance / 3.0, 2.0));
  const int nx = std::min(1200, static_cast<int>(std::ceil((hi.x() - lo.x()) / cell)) + 1);
  const int ny = std::min(1200, static_cast<int>(std::ceil((hi.y() - lo.y()) / cell)) + 1);

  auto blocked = [&](int ix, int iy) {
    const Vec2 p = lo + Vec2(ix * cell, iy * cell);
    for (const auto& o : s.obstacles)
      if ((p - o.center).norm() <= o.radius) return true;
    return false;
  };
  auto cell_of = [&](const Vec2& p) {
    int ix = static_cast<int>(std::round((p.x() - lo.x()) / cell));
    int iy = static_cast<int>(std::round((p.y() - lo.y()) / cell));
    return std::pair<int, int>(std::clamp(ix, 0, nx - 1), std::clamp(iy, 0, ny - 1));
  };

  const auto [sx, sy] = cell_of(a);
  const auto [gx, gy] = cell_of(b);
  std::vector<char> seen(static_cast<std::size_t>(nx) * ny, 0);
  auto idx = [&](int ix, int iy) { return static_cast<std::size_t>(iy) * nx + ix; };

  std::queue<std::pair<int, int>> q;
  // The endpoint cells count as free even if the grid center snaps inside a
  // ball; the endpoints themselves are validated separately.
  q.emplace(sx, sy);
  seen[idx(sx, sy)] = 1;
  while (!q.empty()) {
    const auto [cx, cy] = q.front();
    q.pop();
    if (cx == gx && cy == gy) return true;
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        if (dx == 0 && dy == 0) continue;
        const int x = cx + dx, y = cy + dy;
        if (x < 0 || y < 0 || x >= nx || y >= ny) continue;
        if (seen[idx(x, y)]) continue;
        seen[idx(x, y)] = 1;
        if (!blocked(x, y) || (x == gx && y == gy)) q.emplace(x, y);
      }
    }
  }
  return false;
}

std::uint64_t walk_seed_for(std::uint64_t map_seed, int id) {
  SplitMix64 h(map_seed ^ (0xa076'1d64'78bd'642fULL + static_cast<std::uint64_t>(id)));
  return h.next();
}

}  // namespace

Vec2 Obstacle::center_at(double t) const {
  const auto* walk = std::get_if<RandomWalkMotion>(&motion);
  if (walk == nullptr || t <= 0.0 || walk->step <= 0.0) return center;

  const int full = static_cast<int>(std::floor(t / walk->step));
  const double frac = t - full * walk->step;
  SplitMix64 rng(walk->seed);
  Vec2 p = center;
  Vec2 v = Vec2::Zero();
  for (int k = 0; k < full; ++k) {
    v += walk->step * draw_walk_accel(rng, v, *walk);
    p += walk->step * v;
  }
  if (frac > 0.0) {
    v += walk->step * draw_walk_accel(rng, v, *walk);
    p += frac * v;
  }
  return p;
}

bool Scenario::has_moving_obstacles() const {
  return std::any_of(obstacles.begin(), obstacles.end(),
                     [](const Obstacle& o) { return o.is_moving(); });
}

std::vector<Ball> Scenario::balls_at(double t) const {
  std::vector<Ball> out;
  out.reserve(obstacles.size());
  for (const auto& o : obstacles) out.push_back({o.center_at(t), o.radius});
  return out;
}

Mat4 default_Q1(double v_max) {
  Mat4 q = Mat4::Zero();
  q(0, 0) = q(1, 1) = 1e-9;
  q(2, 2) = q(3, 3) = 1.0 / (v_max * v_max);
  return q;
}

Mat2 default_Q2(double a_max) { return Mat2::Identity() / (a_max * a_max); }

double surface_clearance(const Scenario& s, const Vec2& pos, double t) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : s.obstacles)
    best = std::min(best, (pos - o.center_at(t)).norm() - o.radius);
  return best;
}

Scenario generate_scenario(const GenerationParams& params, std::uint64_t seed) {
  if (params.n_obstacles < 0 || params.r_min <= 0.0 || params.r_max < params.r_min ||
      params.clearance < 0.0 || params.h <= 0.0 || params.v_max <= 0.0 ||
      params.a_max <= 0.0 || params.gamma <= 0.0 || params.N_min < 1 ||
      params.N_max < params.N_min ||
      (params.bounds_hi - params.bounds_lo).minCoeff() <= 0.0)
    throw std::invalid_argument("generate_scenario: bad generation parameters");

  Scenario s;
  s.z0 = params.z0;
  s.zf = params.zf;
  s.gamma = params.gamma;
  s.clearance = params.clearance;
  s.v_max = params.v_max;
  s.a_max = params.a_max;
  s.h = params.h;
  s.N_min = params.N_min;
  s.N_max = params.N_max;
  s.Q0 = Mat4::Identity();
  s.Q1 = default_Q1(params.v_max);
  s.Q2 = default_Q2(params.a_max);

  SplitMix64 rng(seed);
  const double endpoint_margin = 0.5 * params.clearance;

  for (int map_try = 0; map_try < params.max_map_attempts; ++map_try) {
    s.obstacles.clear();
    bool placed_all = true;
    for (int i = 0; i < params.n_obstacles && placed_all; ++i) {
      placed_all = false;
      for (int attempt = 0; attempt < params.max_attempts_per_obstacle; ++attempt) {
        const double r = rng.uniform(params.r_min, params.r_max);
        const Vec2 c(rng.uniform(params.bounds_lo.x(), params.bounds_hi.x()),
                     rng.uniform(params.bounds_lo.y(), params.bounds_hi.y()));
        if ((c - position_of(params.z0)).norm() <= r + endpoint_margin) continue;
        if ((c - position_of(params.zf)).norm() <= r + endpoint_margin) continue;
        bool separated = true;
        for (const auto& other : s.obstacles) {
          if ((c - other.center).norm() <= r + other.radius + params.clearance) {
            separated = false;
            break;
          }
        }
        if (!separated) continue;

        Obstacle o;
        o.id = i;
        o.center = c;
        o.radius = r;
        if (params.moving) {
          RandomWalkMotion m;
          m.max_speed = params.obstacle_max_speed;
          m.accel_cap =
              params.obstacle_accel_cap > 0.0 ? params.obstacle_accel_cap : m.max_speed;
          m.seed = walk_seed_for(seed, i);
          m.step = params.h;
          o.motion = m;
        }
        s.obstacles.push_back(o);
        placed_all = true;
        break;
      }
    }
    if (placed_all && coarse_reachable(s)) return s;
  }
  throw GenerationError("generate_scenario: attempt budget exhausted (map too crowded?)");
}

ValidationReport validate_scenario(const Scenario& s) {
  ValidationReport rep;
  auto add = [&rep](ValidationIssue::Kind k, std::string d) {
    rep.issues.push_back({k, std::move(d)});
  };

  if (s.h <= 0.0) add(ValidationIssue::Kind::BadParams, "step h must be positive");
  if (s.gamma <= 0.0) add(ValidationIssue::Kind::BadParams, "gamma must be positive");
  if (s.v_max <= 0.0 || s.a_max <= 0.0)
    add(ValidationIssue::Kind::BadParams, "v_max and a_max must be positive");
  if (s.N_min < 1 || s.N_max < s.N_min)
    add(ValidationIssue::Kind::BadParams, "need 1 <= N_min <= N_max");
  if (s.clearance < 0.0)
    add(ValidationIssue::Kind::BadParams, "clearance must be nonnegative");
  for (const auto& o : s.obstacles)
    if (o.radius <= 0.0)
      add(ValidationIssue::Kind::BadParams,
          "obstacle " + std::to_string(o.id) + " has non-positive radius");

  if (!symmetric_pd(s.Q0)) add(ValidationIssue::Kind::BadWeights, "Q0 not symmetric PD");
  if (!symmetric_pd(s.Q1)) add(ValidationIssue::Kind::BadWeights, "Q1 not symmetric PD");
  if (!symmetric_pd(s.Q2)) add(ValidationIssue::Kind::BadWeights, "Q2 not symmetric PD");

  for (const auto& o : s.obstacles) {
    for (const char* label : {"start", "goal"}) {
      const Vec2 p = position_of(label[0] == 's' ? s.z0 : s.zf);
      if ((p - o.center).norm() <= o.radius)
        add(ValidationIssue::Kind::EndpointInsideBall,
            std::string(label) + " position not strictly outside obstacle " +
                std::to_string(o.id));
    }
  }

  for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
    for (std::size_t j = i + 1; j < s.obstacles.size(); ++j) {
      const auto& a = s.obstacles[i];
      const auto& b = s.obstacles[j];
      if ((a.center - b.center).norm() <= a.radius + b.radius + s.clearance)
        add(ValidationIssue::Kind::ClearanceViolated,
            "obstacles " + std::to_string(a.id) + " and " + std::to_string(b.id) +
                " closer than the declared clearance");
    }
  }

  // Reachability is reported independently of clearance issues so crowded
  // hand-written maps still get a connectivity verdict; it only needs sane
  // step/limit parameters.
  const bool params_ok =
      std::none_of(rep.issues.begin(), rep.issues.end(), [](const ValidationIssue& v) {
        return v.kind == ValidationIssue::Kind::BadParams;
      });
  if (params_ok && !coarse_reachable(s))
    add(ValidationIssue::Kind::Unreachable, "no coarse grid path from start to goal");
  return rep;
}

}  // namespace ccp
