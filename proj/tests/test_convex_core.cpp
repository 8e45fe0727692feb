#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ccp/convex.hpp"
#include "ccp/scenario.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

using namespace ccp;

namespace {

// ---------------------------------------------------------------------------
// Reference oracle: nested grid refinement.
//
// Minimizes the program objective over a box by exhaustive sampling (7 points
// per axis), re-centering the box on the incumbent and shrinking it by 3x per
// round. Because the incumbent is always a grid center of the next round, the
// best value is monotone. Handles inequality constraints by rejection, so it
// is only usable for inequality-constrained programs whose feasible set has
// interior overlapping the initial box — which is how the random fixtures
// below are constructed. Resolution after `rounds` rounds: span * 3^-rounds.
// ---------------------------------------------------------------------------
struct OracleResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
};

double program_objective(const ConvexProgram& p, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(0.5 * (p.P + p.P.transpose()) * x) + p.q.dot(x) + p.c;
}

bool program_feasible(const ConvexProgram& p, const Eigen::VectorXd& x, double tol) {
  for (const auto& qc : p.quad_ineq)
    if (x.dot(qc.Q * x) + qc.l.dot(x) - qc.r > tol) return false;
  for (int r = 0; r < p.G.rows(); ++r)
    if (p.G.row(r).dot(x) - p.g(r) > tol) return false;
  return true;
}

OracleResult grid_refine_minimize(const ConvexProgram& p, Eigen::VectorXd lo, Eigen::VectorXd hi,
                                  int rounds = 12) {
  const int n = p.n();
  REQUIRE(p.A_eq.rows() == 0);  // rejection sampling cannot honor equalities
  const int pts = 7;
  OracleResult best;
  Eigen::VectorXd center = 0.5 * (lo + hi);
  Eigen::VectorXd span = 0.5 * (hi - lo);

  for (int round = 0; round < rounds; ++round) {
    Eigen::VectorXd x(n);
    std::vector<int> idx(n, 0);
    bool done = false;
    while (!done) {
      for (int d = 0; d < n; ++d)
        x(d) = center(d) + span(d) * (2.0 * idx[d] / (pts - 1) - 1.0);
      if (program_feasible(p, x, 0.0)) {
        const double v = program_objective(p, x);
        if (v < best.value) {
          best.value = v;
          best.x = x;
        }
      }
      int d = 0;
      for (; d < n; ++d) {
        if (++idx[d] < pts) break;
        idx[d] = 0;
      }
      done = (d == n);
    }
    if (best.x.size() == 0) break;  // nothing feasible at this resolution yet
    center = best.x;
    span /= 3.0;
  }
  return best;
}

// Random inequality-only program with 0 strictly feasible: ball constraints
// containing the origin plus linear rows with positive offsets.
ConvexProgram random_feasible_program(SplitMix64& rng, int n) {
  ConvexProgram p;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = 2.0 * rng.uniform() - 1.0;
  p.P = a.transpose() * a + 0.3 * Eigen::MatrixXd::Identity(n, n);
  p.q = Eigen::VectorXd(n);
  for (int i = 0; i < n; ++i) p.q(i) = 4.0 * rng.uniform() - 2.0;
  p.c = rng.uniform();

  const int n_balls = 2;
  for (int k = 0; k < n_balls; ++k) {
    // (x-ctr)'Q(x-ctr) <= radius2, with the origin strictly inside.
    ConvexProgram::QuadCon qc;
    qc.Q = Eigen::MatrixXd::Identity(n, n) * (0.5 + rng.uniform());
    Eigen::VectorXd ctr(n);
    for (int i = 0; i < n; ++i) ctr(i) = 0.8 * (2.0 * rng.uniform() - 1.0);
    const double radius2 = ctr.dot(qc.Q * ctr) + 0.5 + rng.uniform();
    qc.l = -2.0 * (qc.Q * ctr);
    qc.r = radius2 - ctr.dot(qc.Q * ctr);
    p.quad_ineq.push_back(qc);
  }

  const int n_rows = 3;
  p.G = Eigen::MatrixXd(n_rows, n);
  p.g = Eigen::VectorXd(n_rows);
  for (int r = 0; r < n_rows; ++r) {
    for (int i = 0; i < n; ++i) p.G(r, i) = 2.0 * rng.uniform() - 1.0;
    p.g(r) = 0.2 + rng.uniform();  // strictly positive: origin is interior
  }
  return p;
}

}  // namespace

TEST_CASE("unconstrained quadratic hits the analytic minimizer") {
  ConvexProgram p;
  p.P = Eigen::MatrixXd(2, 2);
  p.P << 4.0, 1.0, 1.0, 3.0;
  p.q = Eigen::VectorXd(2);
  p.q << -1.0, 2.0;
  p.c = 0.5;

  const Solution s = solve(p);
  REQUIRE(s.status == Solution::Status::Optimal);

  const Eigen::VectorXd expected = p.P.ldlt().solve(-p.q);
  CHECK((s.x - expected).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(s.objective == doctest::Approx(program_objective(p, expected)).epsilon(1e-9));
  CHECK(s.kkt.stationarity < 1e-6);
}

TEST_CASE("equality-constrained projection: machine-precision manifold residual") {
  // minimize ||x - a||^2 subject to sum(x) = 1. Analytic solution
  // x = a + (1 - sum a)/n * 1.
  const int n = 5;
  Eigen::VectorXd a(n);
  a << 0.3, -1.2, 2.0, 0.7, -0.4;

  ConvexProgram p;
  p.P = 2.0 * Eigen::MatrixXd::Identity(n, n);
  p.q = -2.0 * a;
  p.c = a.squaredNorm();
  p.A_eq = Eigen::MatrixXd::Ones(1, n);
  p.b_eq = Eigen::VectorXd::Ones(1);

  const Solution s = solve(p);
  REQUIRE(s.status == Solution::Status::Optimal);

  const Eigen::VectorXd expected =
      a + Eigen::VectorXd::Constant(n, (1.0 - a.sum()) / n);
  CHECK((s.x - expected).cwiseAbs().maxCoeff() < 1e-7);
  // Nullspace elimination keeps the iterates on the manifold exactly.
  CHECK(s.kkt.primal_eq < 1e-12);
  CHECK(s.kkt.stationarity < 1e-6);
}

TEST_CASE("active ball constraint recovers the boundary point and its multiplier") {
  // minimize ||x - a||^2 subject to ||x||^2 <= 1, with ||a|| > 1.
  // Solution a/||a||, multiplier ||a|| - 1.
  const int n = 3;
  Eigen::VectorXd a(n);
  a << 2.0, -1.0, 2.0;  // ||a|| = 3

  ConvexProgram p;
  p.P = 2.0 * Eigen::MatrixXd::Identity(n, n);
  p.q = -2.0 * a;
  p.c = a.squaredNorm();
  ConvexProgram::QuadCon ball;
  ball.Q = Eigen::MatrixXd::Identity(n, n);
  ball.l = Eigen::VectorXd::Zero(n);
  ball.r = 1.0;
  p.quad_ineq.push_back(ball);

  const Solution s = solve(p);
  REQUIRE(s.status == Solution::Status::Optimal);
  CHECK((s.x - a / a.norm()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(s.mu_quad(0) == doctest::Approx(a.norm() - 1.0).epsilon(1e-4));
  CHECK(s.kkt.comp_slack < 10.0 * 1e-8 * 10.0);
  CHECK(s.kkt.stationarity < 1e-5);
  CHECK(s.objective == doctest::Approx((a.norm() - 1.0) * (a.norm() - 1.0)).epsilon(1e-6));
}

TEST_CASE("clipped coordinates: linear bounds active at the solution") {
  // minimize ||x - a||^2 with x <= b elementwise; a exceeds b on two axes.
  const int n = 3;
  Eigen::VectorXd a(n), b(n);
  a << 3.0, -1.0, 5.0;
  b << 1.0, 0.0, 2.0;

  ConvexProgram p;
  p.P = 2.0 * Eigen::MatrixXd::Identity(n, n);
  p.q = -2.0 * a;
  p.G = Eigen::MatrixXd::Identity(n, n);
  p.g = b;

  const Solution s = solve(p);
  REQUIRE(s.status == Solution::Status::Optimal);
  Eigen::VectorXd expected = a.cwiseMin(b);
  CHECK((s.x - expected).cwiseAbs().maxCoeff() < 1e-6);
  // Multiplier of an active bound x_i <= b_i equals 2 (a_i - b_i).
  CHECK(s.mu_lin(0) == doctest::Approx(2.0 * (a(0) - b(0))).epsilon(1e-3));
  CHECK(s.mu_lin(2) == doctest::Approx(2.0 * (a(2) - b(2))).epsilon(1e-3));
  CHECK(s.mu_lin(1) < 1e-5);  // inactive
}

TEST_CASE("random inequality programs agree with the grid-refinement oracle") {
  SplitMix64 rng(0x5eedc0ffee);
  int checked = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + static_cast<int>(rng.next() % 2);  // 2 or 3
    ConvexProgram p = random_feasible_program(rng, n);

    const Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -3.0);
    const Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, 3.0);
    const OracleResult oracle = grid_refine_minimize(p, lo, hi, 12);
    REQUIRE(oracle.x.size() == n);

    const Solution s = solve(p);
    REQUIRE(s.status == Solution::Status::Optimal);
    CHECK(s.kkt.primal_ineq < 1e-8);

    // The solver must not be worse than the oracle beyond oracle resolution,
    // and the oracle must not be better than the solver's claimed optimum.
    const double scale = 1.0 + std::abs(oracle.value);
    CHECK(s.objective <= oracle.value + 1e-4 * scale);
    CHECK(oracle.value >= s.objective - 1e-4 * scale);
    ++checked;
  }
  CHECK(checked == 25);
}

TEST_CASE("KKT certificate quality on a mixed program") {
  SplitMix64 rng(77);
  ConvexProgram p = random_feasible_program(rng, 3);
  // Add one equality pinning a random direction through a feasible point.
  p.A_eq = Eigen::MatrixXd(1, 3);
  p.A_eq << 1.0, 1.0, -0.5;
  p.b_eq = Eigen::VectorXd(1);
  p.b_eq << 0.1;

  const Solution s = solve(p);
  REQUIRE(s.status == Solution::Status::Optimal);
  CHECK(s.kkt.primal_eq < 1e-10);
  CHECK(s.kkt.primal_ineq < 1e-8);
  CHECK(s.kkt.stationarity < 1e-5);
  CHECK(s.kkt.comp_slack < 1e-6);
  CHECK(s.kkt.duality_gap < 1e-6 * (1.0 + std::abs(s.objective)));
  // All multipliers nonnegative.
  CHECK(s.mu_quad.minCoeff() >= 0.0);
  if (s.mu_lin.size() > 0) CHECK(s.mu_lin.minCoeff() >= 0.0);
}

TEST_CASE("solve is deterministic") {
  SplitMix64 rng(123);
  ConvexProgram p = random_feasible_program(rng, 3);
  const Solution s1 = solve(p);
  const Solution s2 = solve(p);
  REQUIRE(s1.status == s2.status);
  REQUIRE(s1.x.size() == s2.x.size());
  for (int i = 0; i < s1.x.size(); ++i) CHECK(s1.x(i) == s2.x(i));
  CHECK(s1.objective == s2.objective);
  CHECK(s1.newton_iters == s2.newton_iters);
}

TEST_CASE("warm start skips the feasibility phase and lands on the same point") {
  // minimize ||x||^2 over a ball that excludes the origin, so the cold path
  // must run a feasibility phase while a warm start from the center skips it.
  ConvexProgram p;
  p.P = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  p.q = Eigen::VectorXd::Zero(2);
  ConvexProgram::QuadCon ball;  // ||x - (2,0)||^2 <= 1
  ball.Q = Eigen::MatrixXd::Identity(2, 2);
  ball.l = Eigen::VectorXd(2);
  ball.l << -4.0, 0.0;
  ball.r = 1.0 - 4.0;
  p.quad_ineq.push_back(ball);

  const Solution cold = solve(p);
  REQUIRE(cold.status == Solution::Status::Optimal);
  CHECK(cold.x(0) == doctest::Approx(1.0).epsilon(1e-6));

  SolveOptions warm_opts;
  Eigen::VectorXd x0(2);
  x0 << 2.0, 0.0;
  warm_opts.x0 = x0;
  const Solution warm = solve(p, warm_opts);
  REQUIRE(warm.status == Solution::Status::Optimal);
  CHECK((warm.x - cold.x).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(warm.newton_iters < cold.newton_iters);
}

TEST_CASE("infeasible conflict between a ball and a shifted halfspace") {
  // ||x||^2 <= 1 and x_0 >= 3 cannot hold together.
  ConvexProgram p;
  p.P = Eigen::MatrixXd::Identity(2, 2);
  p.q = Eigen::VectorXd::Zero(2);
  ConvexProgram::QuadCon ball;
  ball.Q = Eigen::MatrixXd::Identity(2, 2);
  ball.l = Eigen::VectorXd::Zero(2);
  ball.r = 1.0;
  p.quad_ineq.push_back(ball);
  p.G = Eigen::MatrixXd(1, 2);
  p.G << -1.0, 0.0;
  p.g = Eigen::VectorXd(1);
  p.g << -3.0;

  const Solution s = solve(p);
  CHECK(s.status == Solution::Status::Infeasible);
}

TEST_CASE("equalities alone can prove infeasibility") {
  ConvexProgram p;
  p.P = Eigen::MatrixXd::Identity(2, 2);
  p.q = Eigen::VectorXd::Zero(2);
  p.A_eq = Eigen::MatrixXd(2, 2);
  p.A_eq << 1.0, 1.0, 2.0, 2.0;  // parallel rows
  p.b_eq = Eigen::VectorXd(2);
  p.b_eq << 1.0, 3.0;  // inconsistent offsets

  const Solution s = solve(p);
  CHECK(s.status == Solution::Status::Infeasible);
}

TEST_CASE("redundant equality rows are removed without changing the solution") {
  const int n = 4;
  Eigen::VectorXd a(n);
  a << 1.0, 2.0, 3.0, 4.0;

  ConvexProgram p;
  p.P = 2.0 * Eigen::MatrixXd::Identity(n, n);
  p.q = -2.0 * a;
  p.A_eq = Eigen::MatrixXd(3, n);
  p.A_eq.row(0) << 1.0, 1.0, 0.0, 0.0;
  p.A_eq.row(1) << 0.0, 0.0, 1.0, 1.0;
  p.A_eq.row(2) = p.A_eq.row(0) + p.A_eq.row(1);  // dependent but consistent
  p.b_eq = Eigen::VectorXd(3);
  p.b_eq << 1.0, 2.0, 3.0;

  const PresolvedProgram pre = presolve(p);
  REQUIRE_FALSE(pre.provably_infeasible);
  CHECK(pre.program.A_eq.rows() == 2);

  const Solution s = solve(p);
  REQUIRE(s.status == Solution::Status::Optimal);
  CHECK(s.kkt.primal_eq < 1e-12);
  // Projection of a onto the two constraints, computed by hand per block.
  Eigen::VectorXd expected(n);
  expected << 1.0 - 0.5, 2.0 - 0.5, 3.0 - 1.5, 4.0 - 1.5;
  // block 1: x1+x2=1, a=(1,2) -> shift (1+2-1)/2 = 1 -> (0, 1)
  expected(0) = 1.0 - 1.0;
  expected(1) = 2.0 - 1.0;
  // block 2: x3+x4=2, a=(3,4) -> shift (3+4-2)/2 = 2.5 -> (0.5, 1.5)
  expected(2) = 3.0 - 2.5;
  expected(3) = 4.0 - 2.5;
  CHECK((s.x - expected).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("presolve pins variables held by paired bounds") {
  // x0 is forced to 2 by G rows; objective pulls it to 0.
  ConvexProgram p;
  p.P = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  p.q = Eigen::VectorXd::Zero(2);
  p.G = Eigen::MatrixXd(2, 2);
  p.G << 1.0, 0.0, -1.0, 0.0;
  p.g = Eigen::VectorXd(2);
  p.g << 2.0, -2.0;

  const PresolvedProgram pre = presolve(p);
  REQUIRE_FALSE(pre.provably_infeasible);
  CHECK(pre.free_index == std::vector<int>{1});
  CHECK(pre.fixed_values(0) == doctest::Approx(2.0));

  const Solution s = solve(p);
  REQUIRE(s.status == Solution::Status::Optimal);
  CHECK(s.x(0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(std::abs(s.x(1)) < 1e-7);
  CHECK(s.objective == doctest::Approx(4.0).epsilon(1e-8));
}

TEST_CASE("presolve proves crossed bounds infeasible") {
  ConvexProgram p;
  p.P = Eigen::MatrixXd::Identity(1, 1);
  p.q = Eigen::VectorXd::Zero(1);
  p.G = Eigen::MatrixXd(2, 1);
  p.G << 1.0, -1.0;
  p.g = Eigen::VectorXd(2);
  p.g << 1.0, -2.0;  // x <= 1 and x >= 2

  const PresolvedProgram pre = presolve(p);
  CHECK(pre.provably_infeasible);
  CHECK(solve(p).status == Solution::Status::Infeasible);
}

TEST_CASE("presolve objective bookkeeping keeps values comparable") {
  // After pinning x0 = 2, the reduced program must report the same objective
  // values as the original at lifted points.
  SplitMix64 rng(9);
  ConvexProgram p = random_feasible_program(rng, 3);
  p.G.conservativeResize(p.G.rows() + 2, Eigen::NoChange);
  p.g.conservativeResize(p.g.size() + 2);
  p.G.row(p.G.rows() - 2) << 1.0, 0.0, 0.0;
  p.G.row(p.G.rows() - 1) << -1.0, 0.0, 0.0;
  p.g(p.g.size() - 2) = 0.25;
  p.g(p.g.size() - 1) = -0.25;  // pin x0 = 0.25 (inside the balls)

  const PresolvedProgram pre = presolve(p);
  REQUIRE_FALSE(pre.provably_infeasible);
  REQUIRE(pre.free_index.size() == 2);

  SplitMix64 probe(31);
  for (int k = 0; k < 10; ++k) {
    Eigen::VectorXd y(2);
    y << probe.uniform() - 0.5, probe.uniform() - 0.5;
    const Eigen::VectorXd x = pre.lift(y);
    CHECK(program_objective(pre.program, y) ==
          doctest::Approx(program_objective(p, x)).epsilon(1e-12));
  }
}

TEST_CASE("fully pinned system reduces to a feasibility check") {
  ConvexProgram p;
  p.P = Eigen::MatrixXd::Identity(2, 2);
  p.q = Eigen::VectorXd::Zero(2);
  p.A_eq = Eigen::MatrixXd(2, 2);
  p.A_eq << 2.0, 0.0, 0.0, 4.0;
  p.b_eq = Eigen::VectorXd(2);
  p.b_eq << 2.0, 2.0;  // x = (1, 0.5)

  SUBCASE("inequalities satisfied") {
    p.G = Eigen::MatrixXd(1, 2);
    p.G << 1.0, 1.0;
    p.g = Eigen::VectorXd(1);
    p.g << 2.0;
    const Solution s = solve(p);
    REQUIRE(s.status == Solution::Status::Optimal);
    CHECK(s.x(0) == doctest::Approx(1.0));
    CHECK(s.x(1) == doctest::Approx(0.5));
  }
  SUBCASE("inequalities violated") {
    p.G = Eigen::MatrixXd(1, 2);
    p.G << 1.0, 1.0;
    p.g = Eigen::VectorXd(1);
    p.g << 1.0;  // 1.5 > 1
    CHECK(solve(p).status == Solution::Status::Infeasible);
  }
}

TEST_CASE("newton budget exhaustion reports MaxIterations, not a crash") {
  SplitMix64 rng(5);
  ConvexProgram p = random_feasible_program(rng, 3);
  SolveOptions opts;
  opts.max_newton = 2;
  const Solution s = solve(p, opts);
  CHECK(s.status == Solution::Status::MaxIterations);
  CHECK(s.x.allFinite());
}

TEST_CASE("status strings are stable") {
  CHECK(std::string(to_string(Solution::Status::Optimal)) == "optimal");
  CHECK(std::string(to_string(Solution::Status::Infeasible)) == "infeasible");
  CHECK(std::string(to_string(Solution::Status::MaxIterations)) == "max-iterations");
  CHECK(std::string(to_string(Solution::Status::IllConditioned)) == "ill-conditioned");
}

TEST_CASE("dimension mismatches are rejected loudly") {
  ConvexProgram p;
  p.P = Eigen::MatrixXd::Identity(2, 2);
  p.q = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(solve(p), std::invalid_argument);
}
