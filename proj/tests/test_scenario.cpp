#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ccp/scenario.hpp"

#include <cmath>
#include <set>

using namespace ccp;

namespace {

GenerationParams table_defaults() { return GenerationParams{}; }

bool contains(const ValidationReport& rep, ValidationIssue::Kind kind) {
  for (const auto& issue : rep.issues)
    if (issue.kind == kind) return true;
  return false;
}

}  // namespace

TEST_CASE("default weights are positive definite and encode the limits") {
  const Mat4 q1 = default_Q1(12.0);
  CHECK(q1(2, 2) == doctest::Approx(1.0 / 144.0));
  CHECK(q1(0, 0) > 0.0);
  const Mat2 q2 = default_Q2(20.0);
  CHECK(q2(0, 0) == doctest::Approx(1.0 / 400.0));

  // A state at exactly v_max sits essentially on the unit level set.
  Vec4 z(10.0, 20.0, 12.0, 0.0);
  CHECK(quad_form(q1, z) == doctest::Approx(1.0).epsilon(1e-4));
  Vec2 u(0.0, 20.0);
  CHECK(quad_form(q2, u) == doctest::Approx(1.0));
}

TEST_CASE("generation is deterministic in the seed and varies across seeds") {
  const auto params = table_defaults();
  const Scenario a = generate_scenario(params, 20250712);
  const Scenario b = generate_scenario(params, 20250712);
  REQUIRE(a.obstacles.size() == b.obstacles.size());
  for (std::size_t i = 0; i < a.obstacles.size(); ++i) {
    CHECK(a.obstacles[i].center == b.obstacles[i].center);
    CHECK(a.obstacles[i].radius == b.obstacles[i].radius);
  }
  const Scenario c = generate_scenario(params, 20250713);
  bool differs = c.obstacles.size() != a.obstacles.size();
  for (std::size_t i = 0; !differs && i < a.obstacles.size(); ++i)
    differs = (a.obstacles[i].center - c.obstacles[i].center).norm() > 1e-12;
  CHECK(differs);
}

TEST_CASE("generated maps satisfy the placement contract across 100 seeds") {
  const auto params = table_defaults();
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const Scenario s = generate_scenario(params, seed);
    REQUIRE(static_cast<int>(s.obstacles.size()) == params.n_obstacles);
    const ValidationReport rep = validate_scenario(s);
    CHECK_MESSAGE(rep.ok(), "seed ", seed, " produced ", rep.issues.size(), " issues");
    for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
      CHECK(s.obstacles[i].radius >= params.r_min);
      CHECK(s.obstacles[i].radius <= params.r_max);
      for (std::size_t j = i + 1; j < s.obstacles.size(); ++j) {
        const double gap = (s.obstacles[i].center - s.obstacles[j].center).norm() -
                           s.obstacles[i].radius - s.obstacles[j].radius;
        CHECK(gap > params.clearance);
      }
    }
  }
}

TEST_CASE("the reference static map generates and validates") {
  // 20 obstacles, radii 3..11, gap 7, start at the origin, goal at (160,160).
  const Scenario s = generate_scenario(table_defaults(), 20250712);
  CHECK(validate_scenario(s).ok());
  CHECK(s.v_max == 12.0);
  CHECK(s.a_max == 20.0);
  CHECK(!s.has_moving_obstacles());
}

TEST_CASE("generation fails after bounded attempts on impossible requests") {
  GenerationParams p = table_defaults();
  p.n_obstacles = 60;
  p.bounds_hi = Vec2(40.0, 40.0);
  p.max_attempts_per_obstacle = 50;
  p.max_map_attempts = 3;
  CHECK_THROWS_AS(generate_scenario(p, 7), GenerationError);
}

TEST_CASE("validator flags endpoint-in-ball, clearance, and weight issues") {
  Scenario s = generate_scenario(table_defaults(), 3);

  SUBCASE("endpoint inside a ball") {
    Obstacle o;
    o.id = 99;
    o.center = position_of(s.z0);
    o.radius = 2.0;
    s.obstacles.push_back(o);
    CHECK(contains(validate_scenario(s), ValidationIssue::Kind::EndpointInsideBall));
  }
  SUBCASE("endpoint exactly on the surface is still rejected") {
    Obstacle o;
    o.id = 99;
    o.center = position_of(s.z0) + Vec2(2.0, 0.0);
    o.radius = 2.0;
    s.obstacles.push_back(o);
    CHECK(contains(validate_scenario(s), ValidationIssue::Kind::EndpointInsideBall));
  }
  SUBCASE("pairwise clearance violation") {
    Obstacle o = s.obstacles.front();
    o.id = 99;
    o.center += Vec2(0.1, 0.0);
    s.obstacles.push_back(o);
    CHECK(contains(validate_scenario(s), ValidationIssue::Kind::ClearanceViolated));
  }
  SUBCASE("indefinite weight matrix") {
    s.Q0(0, 0) = -1.0;
    CHECK(contains(validate_scenario(s), ValidationIssue::Kind::BadWeights));
  }
  SUBCASE("positive semidefinite-only Q1 is rejected") {
    s.Q1(0, 0) = 0.0;
    s.Q1(1, 1) = 0.0;
    CHECK(contains(validate_scenario(s), ValidationIssue::Kind::BadWeights));
  }
  SUBCASE("unreachable goal enclosed by a ring") {
    Scenario ringed = s;
    ringed.obstacles.clear();
    // Overlapping balls encircling the goal; the clearance complaint this
    // also raises must not mask the connectivity verdict.
    int id = 0;
    for (int k = 0; k < 24; ++k) {
      const double ang = 2.0 * 3.14159265358979 * k / 24.0;
      Obstacle o;
      o.id = id++;
      o.center = position_of(ringed.zf) + 20.0 * Vec2(std::cos(ang), std::sin(ang));
      o.radius = 4.0;
      ringed.obstacles.push_back(o);
    }
    const auto rep = validate_scenario(ringed);
    CHECK(contains(rep, ValidationIssue::Kind::Unreachable));
    CHECK(contains(rep, ValidationIssue::Kind::ClearanceViolated));
  }
}

TEST_CASE("static obstacles never move") {
  Obstacle o;
  o.center = Vec2(5.0, -3.0);
  o.radius = 2.0;
  CHECK(o.center_at(0.0) == o.center);
  CHECK(o.center_at(17.3) == o.center);
}

TEST_CASE("random walk paths are pure, seeded, and speed-bounded") {
  Obstacle o;
  o.center = Vec2(10.0, 10.0);
  o.radius = 3.0;
  RandomWalkMotion m;
  m.max_speed = 1.8;
  m.accel_cap = 1.8;
  m.seed = 42;
  m.step = 0.25;
  o.motion = m;

  CHECK(o.center_at(0.0) == o.center);
  CHECK(o.center_at(-1.0) == o.center);

  // Purity: same query twice, and out-of-order queries, give identical answers.
  const Vec2 at5 = o.center_at(5.0);
  const Vec2 at2 = o.center_at(2.0);
  CHECK(o.center_at(5.0) == at5);
  CHECK(o.center_at(2.0) == at2);

  // Lipschitz bound over a long walk, including fractional offsets.
  double max_ratio = 0.0;
  Vec2 prev = o.center_at(0.0);
  for (int k = 1; k <= 1000; ++k) {
    const double t = 0.125 * k;  // half-step stride exercises interpolation
    const Vec2 cur = o.center_at(t);
    max_ratio = std::max(max_ratio, (cur - prev).norm() / 0.125);
    prev = cur;
  }
  CHECK(max_ratio <= m.max_speed + 1e-9);

  // The walk actually moves (a frozen walk would make the dynamic tests vacuous).
  CHECK((o.center_at(20.0) - o.center).norm() > 0.1);

  // Different seeds diverge.
  Obstacle o2 = o;
  std::get<RandomWalkMotion>(o2.motion).seed = 43;
  CHECK((o2.center_at(10.0) - o.center_at(10.0)).norm() > 1e-6);
}

TEST_CASE("moving maps carry distinct per-obstacle walk seeds") {
  GenerationParams p = table_defaults();
  p.moving = true;
  p.n_obstacles = 3;
  p.obstacle_max_speed = 1.8;
  p.v_max = 6.0;
  p.a_max = 6.0;
  const Scenario s = generate_scenario(p, 11);
  REQUIRE(s.has_moving_obstacles());
  std::set<std::uint64_t> seeds;
  for (const auto& o : s.obstacles) {
    REQUIRE(o.is_moving());
    const auto& m = std::get<RandomWalkMotion>(o.motion);
    CHECK(m.max_speed == 1.8);
    CHECK(m.accel_cap == 1.8);  // defaulted to max_speed
    CHECK(m.step == s.h);
    seeds.insert(m.seed);
  }
  CHECK(seeds.size() == s.obstacles.size());
}

TEST_CASE("surface clearance is signed and +inf on empty maps") {
  Scenario s;
  CHECK(std::isinf(surface_clearance(s, Vec2(1.0, 1.0), 0.0)));
  Obstacle o;
  o.center = Vec2(0.0, 0.0);
  o.radius = 2.0;
  s.obstacles.push_back(o);
  CHECK(surface_clearance(s, Vec2(5.0, 0.0), 0.0) == doctest::Approx(3.0));
  CHECK(surface_clearance(s, Vec2(1.0, 0.0), 0.0) == doctest::Approx(-1.0));
}
