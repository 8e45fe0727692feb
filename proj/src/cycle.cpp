#include "ccp/cycle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

namespace ccp {

namespace {

int anchor_index(int i, CycleConfig::Anchor a) {
  if (a == CycleConfig::Anchor::initial_knot) return 0;
  return std::max(0, i - 1);
}

std::vector<Ball> knot_balls(const Scenario& s, double t_start, int i,
                             CycleConfig::Timing timing) {
  const double t =
      timing == CycleConfig::Timing::frozen ? t_start : t_start + i * s.h;
  return s.balls_at(t);
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double dd = d.squaredNorm();
  if (dd < 1e-24) return (p - a).norm();
  const double t = std::clamp((p - a).dot(d) / dd, 0.0, 1.0);
  return (p - (a + t * d)).norm();
}

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Distance from p to the filled triangle {a, b, c}; 0 when p is inside.
/// Degenerate triangles fall through to the nearest-edge distance.
double point_triangle_distance(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  const double s1 = cross2(b - a, p - a);
  const double s2 = cross2(c - b, p - b);
  const double s3 = cross2(a - c, p - c);
  const double mag = std::max({std::abs(s1), std::abs(s2), std::abs(s3)});
  const bool inside = mag > 1e-12 && ((s1 >= 0.0 && s2 >= 0.0 && s3 >= 0.0) ||
                                      (s1 <= 0.0 && s2 <= 0.0 && s3 <= 0.0));
  if (inside) return 0.0;
  return std::min({point_segment_distance(p, a, b), point_segment_distance(p, b, c),
                   point_segment_distance(p, c, a)});
}

/// Affine expression of knot i's full state in strict-program variables:
/// z_i = M x + m. Knot 0 is pure data.
struct KnotMap {
  Eigen::MatrixXd M;
  Vec4 m = Vec4::Zero();
};

std::vector<KnotMap> strict_knot_maps(const ConvexRegion& region, const StrictLayout& L,
                                      CycleConfig::Anchor anchor) {
  const int N = region.N();
  std::vector<KnotMap> maps(static_cast<std::size_t>(N) + 1);
  for (int i = 0; i <= N; ++i) {
    KnotMap& km = maps[static_cast<std::size_t>(i)];
    km.M = Eigen::MatrixXd::Zero(4, L.n());
    if (i == 0) {
      km.m = region.tilde_z[0];
      continue;
    }
    const CorridorCoeffs cc = corridor_coeffs(region, i, anchor);
    km.m.head<2>() = cc.base;
    km.M(0, L.lf(i)) = cc.along.x();
    km.M(1, L.lf(i)) = cc.along.y();
    km.M(0, L.ld(i)) = cc.detour.x();
    km.M(1, L.ld(i)) = cc.detour.y();
    km.M(2, L.tail(i)) = 1.0;
    km.M(3, L.tail(i) + 1) = 1.0;
  }
  return maps;
}

ConvexProgram::QuadCon state_norm_con(const Eigen::MatrixXd& M, const Vec4& m,
                                      const Mat4& Q) {
  ConvexProgram::QuadCon qc;
  qc.Q = M.transpose() * Q * M;
  qc.l = 2.0 * (M.transpose() * (Q * m));
  qc.r = 1.0 - m.dot(Q * m);
  return qc;
}

}  // namespace

CorridorCoeffs corridor_coeffs(const ConvexRegion& region, int i,
                               CycleConfig::Anchor anchor) {
  const Vec2 bp = position_of(region.bar_z[static_cast<std::size_t>(i)]);
  const Vec2 tp = position_of(region.tilde_z[static_cast<std::size_t>(i)]);
  const Vec2 ap =
      position_of(region.tilde_z[static_cast<std::size_t>(anchor_index(i, anchor))]);
  const double lm = region.lambda_min[static_cast<std::size_t>(i)];
  CorridorCoeffs cc;
  cc.base = bp + lm * (tp - bp);
  cc.along = (1.0 - lm) * (tp - bp);
  cc.detour = ap - tp;
  return cc;
}

Vec2 corridor_position(const ConvexRegion& region, int i, double lambda_f, double lambda_d,
                       CycleConfig::Anchor anchor) {
  const CorridorCoeffs cc = corridor_coeffs(region, i, anchor);
  return cc.base + lambda_f * cc.along + lambda_d * cc.detour;
}

ConvexProgram build_relaxed(const Vec4& z0, int N, const AffineDynamics& dyn,
                            const Scenario& s) {
  if (N < 1) throw std::invalid_argument("build_relaxed: need at least one step");
  const RelaxedLayout L{N};
  const int n = L.n();

  ConvexProgram p;
  p.P = Eigen::MatrixXd::Zero(n, n);
  p.q = Eigen::VectorXd::Zero(n);
  p.P.block<4, 4>(L.state(N), L.state(N)) = 2.0 * s.Q0;
  p.q.segment<4>(L.state(N)) = -2.0 * (s.Q0 * s.zf);
  p.c = s.zf.dot(s.Q0 * s.zf);

  p.A_eq = Eigen::MatrixXd::Zero(4 * N, n);
  p.b_eq = Eigen::VectorXd::Zero(4 * N);
  for (int i = 0; i < N; ++i) {
    const int r = 4 * i;
    p.A_eq.block<4, 4>(r, L.state(i + 1)) = Mat4::Identity();
    if (i == 0)
      p.b_eq.segment<4>(r) = dyn.A * z0 + dyn.w;
    else {
      p.A_eq.block<4, 4>(r, L.state(i)) = -dyn.A;
      p.b_eq.segment<4>(r) = dyn.w;
    }
    p.A_eq.block<4, 2>(r, L.ctrl(i)) = -dyn.B;
  }

  for (int i = 1; i <= N; ++i) {
    ConvexProgram::QuadCon qc;
    qc.Q = Eigen::MatrixXd::Zero(n, n);
    qc.Q.block<4, 4>(L.state(i), L.state(i)) = s.Q1;
    qc.l = Eigen::VectorXd::Zero(n);
    qc.r = 1.0;
    p.quad_ineq.push_back(std::move(qc));
  }
  for (int i = 0; i < N; ++i) {
    ConvexProgram::QuadCon qc;
    qc.Q = Eigen::MatrixXd::Zero(n, n);
    qc.Q.block<2, 2>(L.ctrl(i), L.ctrl(i)) = s.Q2;
    qc.l = Eigen::VectorXd::Zero(n);
    qc.r = 1.0;
    p.quad_ineq.push_back(std::move(qc));
  }

  p.G = Eigen::MatrixXd::Zero(0, n);
  p.g = Eigen::VectorXd::Zero(0);
  return p;
}

Trajectory unpack_relaxed(const Eigen::VectorXd& x, const Vec4& z0, int N) {
  const RelaxedLayout L{N};
  if (x.size() != L.n()) throw std::invalid_argument("unpack_relaxed: wrong vector size");
  Trajectory t;
  t.states.resize(static_cast<std::size_t>(N) + 1);
  t.controls.resize(static_cast<std::size_t>(N));
  t.states[0] = z0;
  for (int i = 1; i <= N; ++i)
    t.states[static_cast<std::size_t>(i)] = x.segment<4>(L.state(i));
  for (int i = 0; i < N; ++i)
    t.controls[static_cast<std::size_t>(i)] = x.segment<2>(L.ctrl(i));
  return t;
}

std::vector<double> compute_lambda_min(const std::vector<Vec4>& bar_z,
                                       const std::vector<Vec4>& tilde_z, const Scenario& s,
                                       double t_start, CycleConfig::Timing timing) {
  if (bar_z.size() != tilde_z.size() || bar_z.empty())
    throw std::invalid_argument("compute_lambda_min: knot lists must match and be nonempty");

  std::vector<double> out(bar_z.size(), 0.0);
  for (std::size_t i = 0; i < bar_z.size(); ++i) {
    const Vec2 bp = position_of(bar_z[i]);
    const Vec2 tp = position_of(tilde_z[i]);
    const Vec2 d = tp - bp;
    const double a = d.squaredNorm();
    double lm = 0.0;
    for (const Ball& ball : knot_balls(s, t_start, static_cast<int>(i), timing)) {
      const Vec2 e = bp - ball.center;
      const double c = e.squaredNorm() - ball.radius * ball.radius;
      if (a < 1e-24) {
        if (c < 0.0)
          throw DegenerateSegment("interpolation segment collapsed inside an obstacle");
        continue;
      }
      const double b = 2.0 * e.dot(d);
      const double disc = b * b - 4.0 * a * c;
      if (disc < 0.0) continue;
      const double sq = std::sqrt(disc);
      for (const double root : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)})
        if (root >= 0.0 && root <= 1.0) lm = std::max(lm, root);
    }
    out[i] = std::min(lm, 1.0 - 1e-9);
  }
  return out;
}

std::vector<double> select_k(const ConvexRegion& region, const Scenario& s, double t_start,
                             const CycleConfig& cfg) {
  const int N = region.N();
  std::vector<double> out(static_cast<std::size_t>(N) + 1, 0.0);
  for (int i = 1; i <= N; ++i) {
    const CorridorCoeffs cc = corridor_coeffs(region, i, cfg.anchor);
    const Vec2 v0 = cc.base;
    const Vec2 v1 = position_of(region.tilde_z[static_cast<std::size_t>(i)]);
    const auto balls = knot_balls(s, t_start, i, cfg.timing);
    for (int kk = 10; kk >= 1; --kk) {
      const double k = kk / 10.0;
      const Vec2 v2 = v1 + k * cc.detour;
      bool clear = true;
      for (const Ball& ball : balls)
        if (point_triangle_distance(ball.center, v0, v1, v2) < ball.radius - 1e-9) {
          clear = false;
          break;
        }
      if (clear) {
        out[static_cast<std::size_t>(i)] = k;
        break;
      }
    }
  }
  return out;
}

ConvexProgram build_strict(const ConvexRegion& region, const AffineDynamics& dyn,
                           const Scenario& s, double rho, const CycleConfig& cfg) {
  if (rho < 0.0) throw std::invalid_argument("build_strict: rho must be nonnegative");
  const int N = region.N();
  if (N < 1) throw std::invalid_argument("build_strict: need at least one step");
  const StrictLayout L{N};
  const int n = L.n();
  const Vec4 z0 = region.tilde_z[0];
  const auto maps = strict_knot_maps(region, L, cfg.anchor);

  ConvexProgram p;
  p.P = Eigen::MatrixXd::Zero(n, n);
  p.q = Eigen::VectorXd::Zero(n);
  {
    const KnotMap& T = maps[static_cast<std::size_t>(N)];
    const Vec4 e = T.m - s.zf;
    p.P += 2.0 * T.M.transpose() * s.Q0 * T.M;
    p.q += 2.0 * (T.M.transpose() * (s.Q0 * e));
    p.c += e.dot(s.Q0 * e);
  }
  if (rho > 0.0) {
    const double w = rho * (z0 - s.zf).norm();
    for (int i = 0; i <= N; ++i) {
      p.P(L.lf(i), L.lf(i)) += 2.0 * w;
      p.q(L.lf(i)) += -2.0 * w;
      p.c += w;
    }
  }

  std::vector<int> pinned_d;
  for (int i = 1; i <= N; ++i)
    if (region.k[static_cast<std::size_t>(i)] <= 0.0) pinned_d.push_back(i);

  const int eq_rows = 4 * N + 2 + static_cast<int>(pinned_d.size());
  p.A_eq = Eigen::MatrixXd::Zero(eq_rows, n);
  p.b_eq = Eigen::VectorXd::Zero(eq_rows);
  int r = 0;
  for (int i = 0; i < N; ++i) {
    const KnotMap& cur = maps[static_cast<std::size_t>(i)];
    const KnotMap& nxt = maps[static_cast<std::size_t>(i) + 1];
    p.A_eq.block(r, 0, 4, n) = nxt.M - dyn.A * cur.M;
    p.A_eq.block<4, 2>(r, L.ctrl(i)) -= dyn.B;
    p.b_eq.segment<4>(r) = dyn.A * cur.m + dyn.w - nxt.m;
    r += 4;
  }
  p.A_eq(r, L.lf(0)) = 1.0;
  p.b_eq(r) = 1.0;
  ++r;
  p.A_eq(r, L.ld(0)) = 1.0;
  ++r;
  for (const int i : pinned_d) {
    p.A_eq(r, L.ld(i)) = 1.0;
    ++r;
  }

  int lin_rows = 2 * N;
  for (int i = 1; i <= N; ++i)
    if (region.k[static_cast<std::size_t>(i)] > 0.0) lin_rows += 2;
  p.G = Eigen::MatrixXd::Zero(lin_rows, n);
  p.g = Eigen::VectorXd::Zero(lin_rows);
  r = 0;
  for (int i = 1; i <= N; ++i) {
    p.G(r, L.lf(i)) = -1.0;  // lambda_f >= 0
    ++r;
    p.G(r, L.lf(i)) = 1.0;  // lambda_f <= 1
    p.g(r) = 1.0;
    ++r;
    const double k = region.k[static_cast<std::size_t>(i)];
    if (k > 0.0) {
      p.G(r, L.ld(i)) = -1.0;  // lambda_d >= 0
      ++r;
      p.G(r, L.ld(i)) = 1.0;  // lambda_d <= k * lambda_f
      p.G(r, L.lf(i)) = -k;
      ++r;
    }
  }

  for (int i = 1; i <= N; ++i)
    p.quad_ineq.push_back(
        state_norm_con(maps[static_cast<std::size_t>(i)].M, maps[static_cast<std::size_t>(i)].m, s.Q1));
  for (int i = 0; i < N; ++i) {
    ConvexProgram::QuadCon qc;
    qc.Q = Eigen::MatrixXd::Zero(n, n);
    qc.Q.block<2, 2>(L.ctrl(i), L.ctrl(i)) = s.Q2;
    qc.l = Eigen::VectorXd::Zero(n);
    qc.r = 1.0;
    p.quad_ineq.push_back(std::move(qc));
  }
  return p;
}

Eigen::VectorXd strict_encode_search(const ConvexRegion& region, const Trajectory& searched) {
  const int N = region.N();
  const StrictLayout L{N};
  Eigen::VectorXd x = Eigen::VectorXd::Zero(L.n());
  for (int i = 0; i <= N; ++i) x(L.lf(i)) = 1.0;
  for (int i = 1; i <= N; ++i)
    x.segment<2>(L.tail(i)) = searched.states[static_cast<std::size_t>(i)].tail<2>();
  for (int i = 0; i < N; ++i)
    x.segment<2>(L.ctrl(i)) = searched.controls[static_cast<std::size_t>(i)];
  return x;
}

Trajectory recover(const ConvexRegion& region, const Eigen::VectorXd& strict_x,
                   const AffineDynamics& dyn, const Vec4& z0, const CycleConfig& cfg) {
  const int N = region.N();
  const StrictLayout L{N};
  if (strict_x.size() != L.n())
    throw std::invalid_argument("recover: solution vector has the wrong size");

  std::vector<Vec2> us(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) us[static_cast<std::size_t>(i)] = strict_x.segment<2>(L.ctrl(i));
  const std::vector<Vec4> states = rollout(dyn, z0, us);

  double gap = 0.0;
  for (int i = 0; i <= N; ++i) {
    Vec4 reported = z0;
    if (i > 0) {
      reported.head<2>() = corridor_position(region, i, strict_x(L.lf(i)), strict_x(L.ld(i)),
                                             cfg.anchor);
      reported.tail<2>() = strict_x.segment<2>(L.tail(i));
    }
    gap = std::max(gap,
                   (states[static_cast<std::size_t>(i)] - reported).cwiseAbs().maxCoeff());
  }
  if (gap > 1e-6)
    throw ResidualTooLarge("control rollout and corridor knots disagree by " +
                           std::to_string(gap));

  Trajectory t;
  t.states = states;
  t.controls = us;
  return t;
}

bool certify_local_optimum(const ConvexRegion& region, const Eigen::VectorXd& lambda_f,
                           const Eigen::VectorXd& lambda_d, const CycleConfig& cfg) {
  const int N = region.N();
  bool collision_free_everywhere = true;
  for (int i = 0; i <= N; ++i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    if (region.lambda_min[ui] > 0.0 &&
        (region.tilde_z[ui] - region.bar_z[ui]).norm() > 1e-9) {
      collision_free_everywhere = false;
      break;
    }
  }
  if (collision_free_everywhere) return true;

  const double margin = 1e-6;
  for (int i = 0; i <= N; ++i) {
    const CorridorCoeffs cc = corridor_coeffs(region, i, cfg.anchor);
    const double k = region.k[static_cast<std::size_t>(i)];
    const bool has_f = cc.along.norm() > 1e-9;
    const bool has_d = k * cc.detour.norm() > 1e-9;
    if (has_f && !(lambda_f(i) >= margin && lambda_f(i) <= 1.0 - margin)) return false;
    if (has_d &&
        !(lambda_d(i) >= margin && lambda_d(i) <= k * lambda_f(i) - margin))
      return false;
  }
  return true;
}

const char* to_string(CycleOutcome::Status s) {
  switch (s) {
    case CycleOutcome::Status::Ok: return "ok";
    case CycleOutcome::Status::RelaxedNotOptimal: return "relaxed-not-optimal";
    case CycleOutcome::Status::StrictNotOptimal: return "strict-not-optimal";
    case CycleOutcome::Status::RecoveryMismatch: return "recovery-mismatch";
  }
  return "unknown";
}

CycleOutcome solve_cycle(const Vec4& z0, const Trajectory& searched, const AffineDynamics& dyn,
                         const Scenario& s, double rho, double t_start,
                         const SolveOptions& opts, const CycleConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const int N = searched.steps();
  if (N < 1 || searched.states.size() != static_cast<std::size_t>(N) + 1)
    throw std::invalid_argument("solve_cycle: searched trajectory is malformed");

  CycleOutcome out;
  out.region.tilde_z = searched.states;

  const ConvexProgram relaxed_prog = build_relaxed(z0, N, dyn, s);
  SolveOptions relaxed_opts = opts;
  {
    const RelaxedLayout L{N};
    Eigen::VectorXd x0(L.n());
    for (int i = 1; i <= N; ++i)
      x0.segment<4>(L.state(i)) = searched.states[static_cast<std::size_t>(i)];
    for (int i = 0; i < N; ++i)
      x0.segment<2>(L.ctrl(i)) = searched.controls[static_cast<std::size_t>(i)];
    relaxed_opts.x0 = x0;
  }
  auto t0 = clock::now();
  out.relaxed = solve(relaxed_prog, relaxed_opts);
  out.result.diagnostics.relaxed_solve_s =
      std::chrono::duration<double>(clock::now() - t0).count();
  out.result.diagnostics.relaxed_status = out.relaxed.status;
  out.result.diagnostics.relaxed_newton_iters = out.relaxed.newton_iters;
  if (out.relaxed.status != Solution::Status::Optimal) {
    out.status = CycleOutcome::Status::RelaxedNotOptimal;
    return out;
  }

  out.region.bar_z = unpack_relaxed(out.relaxed.x, z0, N).states;
  out.region.lambda_min =
      compute_lambda_min(out.region.bar_z, out.region.tilde_z, s, t_start, cfg.timing);
  out.region.k = select_k(out.region, s, t_start, cfg);

  const ConvexProgram strict_prog = build_strict(out.region, dyn, s, rho, cfg);
  SolveOptions strict_opts = opts;
  strict_opts.x0 = strict_encode_search(out.region, searched);
  t0 = clock::now();
  out.strict = solve(strict_prog, strict_opts);
  out.result.diagnostics.strict_solve_s =
      std::chrono::duration<double>(clock::now() - t0).count();
  out.result.diagnostics.strict_status = out.strict.status;
  out.result.diagnostics.strict_newton_iters = out.strict.newton_iters;
  if (out.strict.status != Solution::Status::Optimal) {
    out.status = CycleOutcome::Status::StrictNotOptimal;
    return out;
  }

  try {
    out.result.trajectory = recover(out.region, out.strict.x, dyn, z0, cfg);
  } catch (const ResidualTooLarge&) {
    out.status = CycleOutcome::Status::RecoveryMismatch;
    return out;
  }

  out.result.lambda_f = out.strict.x.segment(0, N + 1);
  out.result.lambda_d = out.strict.x.segment(N + 1, N + 1);
  out.result.rho_used = rho;
  out.result.N = N;
  out.result.relaxed_objective = out.relaxed.objective;
  out.result.strict_objective = out.strict.objective;
  out.result.local_optimum_certified =
      certify_local_optimum(out.region, out.result.lambda_f, out.result.lambda_d, cfg);

  double min_clear = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= N; ++i)
    min_clear = std::min(
        min_clear, surface_clearance(s, position_of(out.result.trajectory.states[static_cast<std::size_t>(i)]),
                                     t_start + i * s.h));
  out.result.diagnostics.min_clearance = min_clear;
  return out;
}

void dump_region(std::ostream& os, const ConvexRegion& region) {
  os << "region knots: " << region.tilde_z.size() << "\n";
  os.precision(17);
  for (std::size_t i = 0; i < region.tilde_z.size(); ++i) {
    os << i << " bar";
    for (int c = 0; c < 4; ++c) os << ' ' << (region.bar_z.size() > i ? region.bar_z[i](c) : 0.0);
    os << " tilde";
    for (int c = 0; c < 4; ++c) os << ' ' << region.tilde_z[i](c);
    os << " lambda_min " << (region.lambda_min.size() > i ? region.lambda_min[i] : 0.0)
       << " k " << (region.k.size() > i ? region.k[i] : 0.0) << "\n";
  }
}

void dump_program(std::ostream& os, const ConvexProgram& p, const std::string& name) {
  os.precision(17);
  os << "program: " << name << "\nn: " << p.n() << "\nequalities: " << p.A_eq.rows()
     << "\nlinear inequalities: " << p.G.rows()
     << "\nquadratic inequalities: " << p.quad_ineq.size() << "\n";
  const auto matrix = [&os](const char* label, const Eigen::MatrixXd& m) {
    os << label << " (" << m.rows() << "x" << m.cols() << ")\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? " " : "") << m(r, c);
      os << "\n";
    }
  };
  matrix("P", p.P);
  matrix("q", p.q.transpose());
  os << "c " << p.c << "\n";
  matrix("A_eq", p.A_eq);
  matrix("b_eq", p.b_eq.transpose());
  matrix("G", p.G);
  matrix("g", p.g.transpose());
  for (std::size_t k = 0; k < p.quad_ineq.size(); ++k) {
    os << "quad " << k << " r " << p.quad_ineq[k].r << "\n";
    matrix("Q", p.quad_ineq[k].Q);
    matrix("l", p.quad_ineq[k].l.transpose());
  }
}

}  // namespace ccp
