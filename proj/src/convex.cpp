#include "ccp/convex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace ccp {
namespace {

constexpr double kPsdReg = 1e-10;

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

double absmax(const Eigen::MatrixXd& m) {
  return m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

// Indices of rows/columns of Q carrying any nonzero entry.
std::vector<int> support(const Eigen::MatrixXd& Q) {
  std::vector<int> idx;
  for (int i = 0; i < Q.rows(); ++i)
    if (Q.row(i).cwiseAbs().maxCoeff() > 0.0) idx.push_back(i);
  return idx;
}

// Thin factor C with Q(support, support) = C'C, dropping negligible
// eigenvalues. Returns an empty matrix for an all-zero Q.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& Qsub) {
  if (Qsub.rows() == 0) return Eigen::MatrixXd(0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Qsub);
  const auto& vals = es.eigenvalues();
  const double cutoff = std::max(1e-14, 1e-12 * std::abs(vals.maxCoeff()));
  int rank = 0;
  for (int i = 0; i < vals.size(); ++i)
    if (vals(i) > cutoff) ++rank;
  Eigen::MatrixXd C(rank, Qsub.rows());
  int row = 0;
  for (int i = 0; i < vals.size(); ++i)
    if (vals(i) > cutoff) C.row(row++) = std::sqrt(vals(i)) * es.eigenvectors().col(i).transpose();
  return C;
}

// One inequality in the reduced (equality-eliminated) coordinates:
//   ||F y||^2 + lin'y - rhs <= 0.
struct ReducedCon {
  Eigen::MatrixXd F;  // may have zero rows for a linear constraint
  Eigen::VectorXd lin;
  double rhs = 0.0;
  double scale = 1.0;  // original = scale * reduced form
  bool from_quad = false;
  int orig_index = -1;

  double eval(const Eigen::VectorXd& y) const {
    double v = lin.dot(y) - rhs;
    if (F.rows() > 0) v += (F * y).squaredNorm();
    return v;
  }
  Eigen::VectorXd grad(const Eigen::VectorXd& y) const {
    Eigen::VectorXd g = lin;
    if (F.rows() > 0) g += 2.0 * (F.transpose() * (F * y));
    return g;
  }
};

struct BarrierProblem {
  Eigen::MatrixXd P;  // already includes the PSD regularizer
  Eigen::VectorXd q;
  double c = 0.0;
  std::vector<ReducedCon> cons;

  double objective(const Eigen::VectorXd& y) const {
    return 0.5 * y.dot(P * y) + q.dot(y) + c;
  }
};

struct BarrierResult {
  enum class Kind { Converged, OutOfBudget, NumericalFailure };
  Kind kind = Kind::NumericalFailure;
  Eigen::VectorXd y;
  double t_final = 1.0;
};

// Classic path-following barrier: Newton centering with feasibility-aware
// backtracking, gap m/t driven below tol * (1 + |objective|). `stop_early`
// lets the feasibility phase bail out as soon as it is strictly feasible.
// `t0` is the initial path parameter: 1 for cold starts, larger when the
// start is already close to the optimum (see the centrality fit in solve).
template <typename EarlyStop>
BarrierResult barrier_minimize(const BarrierProblem& bp, Eigen::VectorXd y, double tol,
                               double mu, int& budget, EarlyStop stop_early,
                               double t0 = 1.0) {
  const int m = static_cast<int>(bp.cons.size());
  const int ny = static_cast<int>(y.size());
  BarrierResult res;
  res.y = y;

  auto barrier_value = [&](const Eigen::VectorXd& yy, double t, bool& ok) {
    double phi = t * bp.objective(yy);
    ok = true;
    for (const auto& con : bp.cons) {
      const double g = con.eval(yy);
      if (g >= 0.0) {
        ok = false;
        return phi;
      }
      phi -= std::log(-g);
    }
    return phi;
  };

  double t = t0;
  for (int outer = 0; outer < 64; ++outer) {
    // Centering.
    bool centered = false;
    for (int inner = 0; inner < 64; ++inner) {
      if (budget <= 0) {
        res.kind = BarrierResult::Kind::OutOfBudget;
        res.t_final = t;
        return res;
      }
      if (stop_early(y)) {
        res.kind = BarrierResult::Kind::Converged;
        res.y = y;
        res.t_final = t;
        return res;
      }

      Eigen::VectorXd grad = t * (bp.P * y + bp.q);
      Eigen::MatrixXd H = t * bp.P;
      for (const auto& con : bp.cons) {
        const double g = con.eval(y);
        const Eigen::VectorXd cg = con.grad(y);
        grad += cg / (-g);
        H.noalias() += cg * cg.transpose() / (g * g);
        if (con.F.rows() > 0) H.noalias() += (2.0 / (-g)) * (con.F.transpose() * con.F);
      }

      Eigen::VectorXd step;
      bool solved = false;
      double reg = 0.0;
      for (int attempt = 0; attempt < 6 && !solved; ++attempt) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(H + reg * Eigen::MatrixXd::Identity(ny, ny));
        if (ldlt.info() == Eigen::Success) {
          step = ldlt.solve(-grad);
          solved = finite(step);
        }
        reg = (reg == 0.0) ? 1e-10 : reg * 100.0;
      }
      if (!solved) {
        res.kind = BarrierResult::Kind::NumericalFailure;
        res.y = y;
        res.t_final = t;
        return res;
      }
      --budget;

      const double decrement = -grad.dot(step);  // lambda^2
      bool ok = false;
      const double phi0 = barrier_value(y, t, ok);
      if (getenv("CCP_TRACE")) {
        double ms = 1e300;
        for (const auto& con : bp.cons) ms = std::min(ms, -con.eval(y));
        fprintf(stderr, "TR outer=%d inner=%d t=%.3e dec=%.6e phi0=%.9e f=%.9e minslack=%.3e\n",
                outer, inner, t, decrement, phi0, bp.objective(y), ms);
      }
      // Threshold tracks the objective scale, not phi ~ t*f: duals are read
      // off the final centering, so precision must not degrade as t grows.
      if (decrement * 0.5 <= 1e-12 * (1.0 + std::abs(bp.objective(y)))) {
        centered = true;
        break;
      }

      double alpha = 1.0;
      Eigen::VectorXd cand;
      double phi_accepted = phi0;
      for (int ls = 0; ls < 60; ++ls) {
        cand = y + alpha * step;
        bool cand_ok = false;
        const double phi = barrier_value(cand, t, cand_ok);
        if (cand_ok && phi <= phi0 - 0.25 * alpha * decrement) {
          phi_accepted = phi;
          break;
        }
        alpha *= 0.5;
        if (ls == 59) cand = y;  // no progress possible
      }
      if ((cand - y).norm() == 0.0) {
        // Line search cannot improve phi any further in floating point; treat
        // the point as centered rather than spinning on zero-length steps.
        centered = true;
        break;
      }
      y = cand;
      // Once t*f dwarfs the objective, phi cannot resolve decreases below its
      // own rounding noise and the Armijo test starts passing on noise. An
      // accepted step that made no representable progress means the point is
      // as centered as double precision allows at this t.
      if (phi_accepted >= phi0 - 16.0 * std::numeric_limits<double>::epsilon() *
                                     (1.0 + std::abs(phi0))) {
        centered = true;
        break;
      }
    }

    res.y = y;
    if (!centered) {
      // Centering ran out of iterations before the decrement threshold.
      // Advancing t from an off-path iterate drives it into the boundary and
      // eventually breaks the Newton system, so stop honestly instead.
      res.kind = BarrierResult::Kind::OutOfBudget;
      res.t_final = t;
      return res;
    }
    const double gap = (m > 0) ? static_cast<double>(m) / t : 0.0;
    if (gap <= tol * (1.0 + std::abs(bp.objective(y)))) {
      res.kind = BarrierResult::Kind::Converged;
      res.t_final = t;
      return res;
    }
    // Never push t past what the gap tolerance requires: the duals come out
    // of 1/(t*slack) at the final centering, and their precision degrades
    // with overshoot because phi ~ t*f loses resolution as t grows. Capping
    // makes the last round run at the smallest sufficient t, independent of
    // where the mu-lattice happens to land. The 1.05 covers the objective
    // drifting while the round centers.
    const double t_need = m / (tol * (1.0 + std::abs(bp.objective(y))));
    t = std::min(t * mu, 1.05 * t_need);
  }
  res.kind = BarrierResult::Kind::OutOfBudget;
  res.t_final = t;
  return res;
}

}  // namespace

void ConvexProgram::require_consistent() const {
  const int nn = n();
  auto fail = [](const char* what) {
    throw std::invalid_argument(std::string("ConvexProgram: ") + what);
  };
  if (P.rows() != P.cols()) fail("P must be square");
  if (q.size() != nn) fail("q size mismatch");
  if (A_eq.rows() != b_eq.size()) fail("A_eq/b_eq row mismatch");
  if (A_eq.rows() > 0 && A_eq.cols() != nn) fail("A_eq column mismatch");
  for (const auto& qc : quad_ineq) {
    if (qc.Q.rows() != nn || qc.Q.cols() != nn) fail("quad constraint Q mismatch");
    if (qc.l.size() != nn) fail("quad constraint l mismatch");
  }
  if (G.rows() != g.size()) fail("G/g row mismatch");
  if (G.rows() > 0 && G.cols() != nn) fail("G column mismatch");
}

const char* to_string(Solution::Status s) {
  switch (s) {
    case Solution::Status::Optimal: return "optimal";
    case Solution::Status::Infeasible: return "infeasible";
    case Solution::Status::MaxIterations: return "max-iterations";
    case Solution::Status::IllConditioned: return "ill-conditioned";
  }
  return "unknown";
}

Eigen::VectorXd PresolvedProgram::lift(const Eigen::VectorXd& x_reduced) const {
  Eigen::VectorXd x = fixed_values;
  for (std::size_t i = 0; i < free_index.size(); ++i)
    x(free_index[i]) = x_reduced(static_cast<int>(i));
  return x;
}

PresolvedProgram presolve(const ConvexProgram& prog) {
  prog.require_consistent();
  const int n = prog.n();

  PresolvedProgram out;
  out.fixed_mask.assign(n, 0);
  out.fixed_values = Eigen::VectorXd::Zero(n);

  auto declare_infeasible = [&out](std::string why) {
    out.provably_infeasible = true;
    out.note = std::move(why);
  };

  // Pass 1: per-variable bounds harvested from single-variable rows, both in
  // G (paired bounds pin a variable) and in A_eq (a direct pin).
  std::vector<double> lo(n, -std::numeric_limits<double>::infinity());
  std::vector<double> hi(n, std::numeric_limits<double>::infinity());
  for (int r = 0; r < prog.G.rows(); ++r) {
    int nz = -1;
    bool single = true;
    for (int cidx = 0; cidx < n && single; ++cidx) {
      if (prog.G(r, cidx) != 0.0) {
        if (nz >= 0) single = false;
        nz = cidx;
      }
    }
    if (!single || nz < 0) continue;
    const double coef = prog.G(r, nz), rhs = prog.g(r);
    if (coef > 0.0)
      hi[nz] = std::min(hi[nz], rhs / coef);
    else
      lo[nz] = std::max(lo[nz], rhs / coef);
  }
  for (int r = 0; r < prog.A_eq.rows(); ++r) {
    int nz = -1;
    bool single = true;
    for (int cidx = 0; cidx < n && single; ++cidx) {
      if (prog.A_eq(r, cidx) != 0.0) {
        if (nz >= 0) single = false;
        nz = cidx;
      }
    }
    if (!single || nz < 0) continue;
    const double v = prog.b_eq(r) / prog.A_eq(r, nz);
    lo[nz] = std::max(lo[nz], v);
    hi[nz] = std::min(hi[nz], v);
  }

  for (int i = 0; i < n; ++i) {
    const double span_tol = 1e-12 * (1.0 + std::abs(lo[i]));
    if (lo[i] > hi[i] + span_tol) {
      declare_infeasible("variable " + std::to_string(i) + " has crossed bounds");
      out.program = prog;
      return out;
    }
    if (std::isfinite(lo[i]) && hi[i] - lo[i] <= span_tol) {
      out.fixed_mask[i] = 1;
      out.fixed_values(i) = 0.5 * (lo[i] + hi[i]);
    }
  }
  for (int i = 0; i < n; ++i)
    if (!out.fixed_mask[i]) out.free_index.push_back(i);

  const int nr = static_cast<int>(out.free_index.size());
  Eigen::VectorXd xf = out.fixed_values;  // zeros at free slots

  auto reduce_vec = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd rv(nr);
    for (int i = 0; i < nr; ++i) rv(i) = v(out.free_index[i]);
    return rv;
  };
  auto reduce_mat_cols = [&](const Eigen::MatrixXd& M) {
    Eigen::MatrixXd rm(M.rows(), nr);
    for (int i = 0; i < nr; ++i) rm.col(i) = M.col(out.free_index[i]);
    return rm;
  };

  ConvexProgram red;
  {
    const Eigen::MatrixXd Ps = symmetrized(prog.P);
    red.P = Eigen::MatrixXd(nr, nr);
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < nr; ++j) red.P(i, j) = Ps(out.free_index[i], out.free_index[j]);
    red.q = reduce_vec(prog.q + Ps * xf);
    red.c = prog.c + 0.5 * xf.dot(Ps * xf) + prog.q.dot(xf);
  }

  // Equalities: substitute, drop zero rows (checking consistency), then strip
  // dependent rows via rank-revealing QR of the transpose.
  {
    Eigen::MatrixXd A = reduce_mat_cols(prog.A_eq);
    Eigen::VectorXd b = prog.b_eq - prog.A_eq * xf;
    std::vector<int> keep;
    for (int r = 0; r < A.rows(); ++r) {
      if (absmax(A.row(r)) > 0.0) {
        keep.push_back(r);
      } else if (std::abs(b(r)) > 1e-9 * (1.0 + prog.b_eq.cwiseAbs().maxCoeff())) {
        declare_infeasible("equality row " + std::to_string(r) + " reduces to 0 = " +
                           std::to_string(b(r)));
        out.program = prog;
        return out;
      }
    }
    Eigen::MatrixXd Ak(static_cast<int>(keep.size()), nr);
    Eigen::VectorXd bk(static_cast<int>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      Ak.row(static_cast<int>(i)) = A.row(keep[i]);
      bk(static_cast<int>(i)) = b(keep[i]);
    }
    if (Ak.rows() > 0) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Ak.transpose());
      qr.setThreshold(1e-12);
      const int rank = static_cast<int>(qr.rank());
      if (rank < Ak.rows()) {
        const auto perm = qr.colsPermutation().indices();
        std::vector<int> ind(perm.data(), perm.data() + rank);
        std::sort(ind.begin(), ind.end());
        Eigen::MatrixXd Ai(rank, nr);
        Eigen::VectorXd bi(rank);
        for (int i = 0; i < rank; ++i) {
          Ai.row(i) = Ak.row(ind[i]);
          bi(i) = bk(ind[i]);
        }
        // Dropped rows must be consistent with the kept ones.
        const Eigen::VectorXd xls = Ai.completeOrthogonalDecomposition().solve(bi);
        for (int r = 0; r < Ak.rows(); ++r) {
          if (std::binary_search(ind.begin(), ind.end(), r)) continue;
          if (std::abs(Ak.row(r).dot(xls) - bk(r)) > 1e-7 * (1.0 + bk.cwiseAbs().maxCoeff())) {
            declare_infeasible("dependent equality row " + std::to_string(r) +
                               " contradicts the independent set");
            out.program = prog;
            return out;
          }
        }
        Ak = std::move(Ai);
        bk = std::move(bi);
      }
      // Unit-norm rows.
      for (int r = 0; r < Ak.rows(); ++r) {
        const double s = Ak.row(r).norm();
        if (s > 0.0) {
          Ak.row(r) /= s;
          bk(r) /= s;
        }
      }
    }
    red.A_eq = std::move(Ak);
    red.b_eq = std::move(bk);
  }

  // Quadratic inequalities: substitute and rescale; constant ones are checked
  // and dropped (their multiplier reports as zero).
  for (const auto& qc : prog.quad_ineq) {
    const Eigen::MatrixXd Qs = symmetrized(qc.Q);
    ConvexProgram::QuadCon rq;
    rq.Q = Eigen::MatrixXd(nr, nr);
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < nr; ++j) rq.Q(i, j) = Qs(out.free_index[i], out.free_index[j]);
    rq.l = reduce_vec(qc.l + 2.0 * (Qs * xf));
    rq.r = qc.r - xf.dot(Qs * xf) - qc.l.dot(xf);
    const double mag = std::max({absmax(rq.Q), absmax(rq.l), std::abs(rq.r)});
    if (absmax(rq.Q) == 0.0 && absmax(rq.l) == 0.0) {
      if (rq.r < -1e-9 * (1.0 + std::abs(qc.r))) {
        declare_infeasible("quadratic constraint fixed infeasible by pinned variables");
        out.program = prog;
        return out;
      }
      continue;
    }
    if (mag > 0.0) {
      rq.Q /= mag;
      rq.l /= mag;
      rq.r /= mag;
    }
    red.quad_ineq.push_back(std::move(rq));
  }

  // Linear inequalities: substitute, rescale, drop empty rows.
  {
    Eigen::MatrixXd Gr = reduce_mat_cols(prog.G);
    Eigen::VectorXd gr = prog.g - prog.G * xf;
    std::vector<int> keep;
    for (int r = 0; r < Gr.rows(); ++r) {
      if (absmax(Gr.row(r)) > 0.0) {
        keep.push_back(r);
      } else if (gr(r) < -1e-9 * (1.0 + std::abs(prog.g(r)))) {
        declare_infeasible("linear row " + std::to_string(r) + " reduces to 0 <= " +
                           std::to_string(gr(r)));
        out.program = prog;
        return out;
      }
    }
    red.G = Eigen::MatrixXd(static_cast<int>(keep.size()), nr);
    red.g = Eigen::VectorXd(static_cast<int>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      const double s = Gr.row(keep[i]).norm();
      red.G.row(static_cast<int>(i)) = Gr.row(keep[i]) / s;
      red.g(static_cast<int>(i)) = gr(keep[i]) / s;
    }
  }

  out.program = std::move(red);
  return out;
}

Solution solve(const ConvexProgram& prog, const SolveOptions& opts) {
  prog.require_consistent();
  const int n = prog.n();

  Solution sol;
  sol.x = Eigen::VectorXd::Zero(n);
  sol.mu_quad = Eigen::VectorXd::Zero(static_cast<int>(prog.quad_ineq.size()));
  sol.mu_lin = Eigen::VectorXd::Zero(prog.G.rows());
  sol.nu_eq = Eigen::VectorXd::Zero(prog.A_eq.rows());

  // ---- Presolve (variable pinning, equality dedup, row scaling). ----
  // We re-run it here rather than requiring callers to: correctness of the
  // barrier depends on full-rank equalities and on pinned variables being
  // gone (a pinned box has no strict interior).
  PresolvedProgram pre = presolve(prog);
  if (pre.provably_infeasible) {
    sol.status = Solution::Status::Infeasible;
    return sol;
  }
  const ConvexProgram& rp = pre.program;
  const int nredvars = static_cast<int>(pre.free_index.size());

  // Map constraints of the reduced program back to original quad/lin indices.
  // presolve() keeps quad order but may drop constant ones; recompute the map
  // by replaying its drop rule.
  // Mirrors the substitution presolve() performs, so indices line up even
  // when pinned variables zero out a constraint.
  std::vector<int> quad_map;
  {
    const Eigen::VectorXd& xf = pre.fixed_values;
    for (std::size_t k = 0; k < prog.quad_ineq.size(); ++k) {
      const auto& qc = prog.quad_ineq[k];
      const Eigen::MatrixXd Qs = symmetrized(qc.Q);
      const Eigen::VectorXd lsub = qc.l + 2.0 * (Qs * xf);
      double worst = 0.0;
      for (int i = 0; i < nredvars; ++i) {
        const int oi = pre.free_index[i];
        worst = std::max(worst, std::abs(lsub(oi)));
        for (int j = 0; j < nredvars; ++j)
          worst = std::max(worst, std::abs(Qs(oi, pre.free_index[j])));
      }
      if (worst != 0.0) quad_map.push_back(static_cast<int>(k));
    }
  }
  std::vector<int> lin_map;
  {
    for (int r = 0; r < prog.G.rows(); ++r) {
      bool nonzero = false;
      for (int i = 0; i < nredvars && !nonzero; ++i)
        if (prog.G(r, pre.free_index[i]) != 0.0) nonzero = true;
      if (nonzero) lin_map.push_back(r);
    }
  }

  auto finish = [&](const Eigen::VectorXd& x_full) {
    sol.x = x_full;
    sol.objective = 0.5 * x_full.dot(symmetrized(prog.P) * x_full) + prog.q.dot(x_full) + prog.c;

    // KKT residuals in original coordinates.
    Eigen::VectorXd stat = symmetrized(prog.P) * x_full + prog.q;
    double comp = 0.0, gap = 0.0, viol = 0.0;
    for (std::size_t k = 0; k < prog.quad_ineq.size(); ++k) {
      const auto& qc = prog.quad_ineq[k];
      const Eigen::MatrixXd Qs = symmetrized(qc.Q);
      const double gv = x_full.dot(Qs * x_full) + qc.l.dot(x_full) - qc.r;
      viol = std::max(viol, gv);
      const double mu = sol.mu_quad(static_cast<int>(k));
      stat += mu * (2.0 * (Qs * x_full) + qc.l);
      comp = std::max(comp, std::abs(mu * gv));
      gap += mu * std::max(-gv, 0.0);
    }
    for (int r = 0; r < prog.G.rows(); ++r) {
      const double gv = prog.G.row(r).dot(x_full) - prog.g(r);
      viol = std::max(viol, gv);
      const double mu = sol.mu_lin(r);
      stat += mu * prog.G.row(r).transpose();
      comp = std::max(comp, std::abs(mu * gv));
      gap += mu * std::max(-gv, 0.0);
    }
    if (prog.A_eq.rows() > 0) {
      sol.nu_eq = prog.A_eq.transpose().completeOrthogonalDecomposition().solve(-stat);
      stat += prog.A_eq.transpose() * sol.nu_eq;
      sol.kkt.primal_eq = (prog.A_eq * x_full - prog.b_eq).cwiseAbs().maxCoeff();
    }
    sol.kkt.stationarity = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;
    sol.kkt.primal_ineq = std::max(0.0, viol);
    sol.kkt.comp_slack = comp;
    sol.kkt.duality_gap = gap;
  };

  // ---- Equality elimination: x_r = x_p + Z y. ----
  Eigen::VectorXd x_p = Eigen::VectorXd::Zero(nredvars);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(nredvars, nredvars);
  if (rp.A_eq.rows() > 0) {
    x_p = rp.A_eq.completeOrthogonalDecomposition().solve(rp.b_eq);
    if ((rp.A_eq * x_p - rp.b_eq).cwiseAbs().maxCoeff() >
        1e-7 * (1.0 + rp.b_eq.cwiseAbs().maxCoeff())) {
      sol.status = Solution::Status::Infeasible;
      finish(pre.lift(x_p));
      return sol;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(rp.A_eq.transpose());
    qr.setThreshold(1e-12);
    const int rank = static_cast<int>(qr.rank());
    const Eigen::MatrixXd Qfull =
        qr.householderQ() * Eigen::MatrixXd::Identity(nredvars, nredvars);
    Z = Qfull.rightCols(nredvars - rank);
  }
  const int ny = static_cast<int>(Z.cols());

  // ---- Reduced objective and constraints over y. ----
  BarrierProblem bp;
  {
    const std::vector<int> sup = support(rp.P);
    Eigen::MatrixXd Psub(static_cast<int>(sup.size()), static_cast<int>(sup.size()));
    for (std::size_t i = 0; i < sup.size(); ++i)
      for (std::size_t j = 0; j < sup.size(); ++j) Psub(i, j) = rp.P(sup[i], sup[j]);
    Eigen::MatrixXd Zsub(static_cast<int>(sup.size()), ny);
    for (std::size_t i = 0; i < sup.size(); ++i) Zsub.row(static_cast<int>(i)) = Z.row(sup[i]);
    bp.P = Zsub.transpose() * Psub * Zsub;
    bp.P += kPsdReg * Eigen::MatrixXd::Identity(ny, ny);
    bp.q = Z.transpose() * (rp.P * x_p + rp.q);
    bp.c = 0.5 * x_p.dot(rp.P * x_p) + rp.q.dot(x_p) + rp.c;
  }
  for (std::size_t k = 0; k < rp.quad_ineq.size(); ++k) {
    const auto& qc = rp.quad_ineq[k];
    ReducedCon con;
    const std::vector<int> sup = support(qc.Q);
    if (!sup.empty()) {
      Eigen::MatrixXd Qsub(static_cast<int>(sup.size()), static_cast<int>(sup.size()));
      for (std::size_t i = 0; i < sup.size(); ++i)
        for (std::size_t j = 0; j < sup.size(); ++j) Qsub(i, j) = qc.Q(sup[i], sup[j]);
      Eigen::MatrixXd C = psd_factor(Qsub);
      Eigen::MatrixXd Zsub(static_cast<int>(sup.size()), ny);
      for (std::size_t i = 0; i < sup.size(); ++i) Zsub.row(static_cast<int>(i)) = Z.row(sup[i]);
      con.F = C * Zsub;
      // Constant and linear parts from the shift x_p.
      Eigen::VectorXd Qxp = qc.Q * x_p;
      con.lin = Z.transpose() * (2.0 * Qxp + qc.l);
      con.rhs = qc.r - x_p.dot(Qxp) - qc.l.dot(x_p);
    } else {
      con.lin = Z.transpose() * qc.l;
      con.rhs = qc.r - qc.l.dot(x_p);
    }
    con.from_quad = true;
    con.orig_index = quad_map[k];
    bp.cons.push_back(std::move(con));
  }
  for (int r = 0; r < rp.G.rows(); ++r) {
    ReducedCon con;
    con.lin = Z.transpose() * rp.G.row(r).transpose();
    con.rhs = rp.g(r) - rp.G.row(r).dot(x_p);
    con.from_quad = false;
    con.orig_index = lin_map[r];
    bp.cons.push_back(std::move(con));
  }

  // Fully determined by equalities: just check the inequalities.
  if (ny == 0) {
    double worst = 0.0;
    for (const auto& con : bp.cons) worst = std::max(worst, con.eval(Eigen::VectorXd(0)));
    sol.status = worst > 10.0 * opts.tol ? Solution::Status::Infeasible
                                         : Solution::Status::Optimal;
    finish(pre.lift(x_p));
    return sol;
  }

  int budget = opts.max_newton;

  // ---- Strictly feasible start: warm candidate or feasibility phase. ----
  const bool have_warm = opts.x0 && opts.x0->size() == n;
  Eigen::VectorXd y_warm = Eigen::VectorXd::Zero(ny);
  if (have_warm) {
    Eigen::VectorXd x0r(nredvars);
    for (int i = 0; i < nredvars; ++i) x0r(i) = (*opts.x0)(pre.free_index[i]);
    y_warm = Z.transpose() * (x0r - x_p);
  }
  auto max_violation = [&](const Eigen::VectorXd& yy) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& con : bp.cons) worst = std::max(worst, con.eval(yy));
    return worst;
  };
  // A start is only usable when every constraint has a healthy margin: a
  // point hugging a boundary makes the barrier Hessian numerically singular,
  // so such starts go through the feasibility phase to get re-centered.
  auto comfortably_interior = [&](const Eigen::VectorXd& yy) {
    for (const auto& con : bp.cons)
      if (con.eval(yy) > -1e-5 * (1.0 + std::abs(con.rhs))) return false;
    return true;
  };

  // A warm start is a hint, not a commitment: if the main phase fails from
  // it, rerun once from scratch so a bad hint can never lose a solvable
  // program that the cold path would have handled.
  BarrierResult mres;
  for (int attempt = have_warm ? 0 : 1; attempt < 2; ++attempt) {
    const bool from_warm = attempt == 0;
    Eigen::VectorXd y = from_warm ? y_warm : Eigen::VectorXd::Zero(ny);

    if (!bp.cons.empty() && !comfortably_interior(y)) {
      // Feasibility phase over (y, s): minimize s subject to g_k(y) <= s.
      BarrierProblem fp;
      fp.P = kPsdReg * Eigen::MatrixXd::Identity(ny + 1, ny + 1);
      fp.q = Eigen::VectorXd::Zero(ny + 1);
      fp.q(ny) = 1.0;
      for (const auto& con : bp.cons) {
        ReducedCon ext;
        if (con.F.rows() > 0) {
          ext.F = Eigen::MatrixXd::Zero(con.F.rows(), ny + 1);
          ext.F.leftCols(ny) = con.F;
        }
        ext.lin = Eigen::VectorXd::Zero(ny + 1);
        ext.lin.head(ny) = con.lin;
        ext.lin(ny) = -1.0;
        ext.rhs = con.rhs;
        fp.cons.push_back(std::move(ext));
      }
      Eigen::VectorXd ys(ny + 1);
      ys.head(ny) = y;
      ys(ny) = max_violation(y) + 1.0;

      auto feasible_enough = [&](const Eigen::VectorXd& cur) {
        return comfortably_interior(cur.head(ny));
      };
      BarrierResult fres = barrier_minimize(fp, ys, opts.tol, opts.barrier_mu, budget,
                                            feasible_enough);
      if (fres.kind == BarrierResult::Kind::NumericalFailure) {
        sol.status = Solution::Status::IllConditioned;
        finish(pre.lift(x_p + Z * fres.y.head(ny)));
        sol.newton_iters = opts.max_newton - budget;
        return sol;
      }
      const double worst = max_violation(fres.y.head(ny));
      if (worst >= 0.0 || (fres.kind == BarrierResult::Kind::Converged &&
                           fres.y(ny) > 10.0 * opts.tol && worst > -1e-12)) {
        sol.status = worst > 10.0 * opts.tol ? Solution::Status::Infeasible
                                             : Solution::Status::MaxIterations;
        if (fres.kind == BarrierResult::Kind::Converged && fres.y(ny) > 10.0 * opts.tol)
          sol.status = Solution::Status::Infeasible;
        finish(pre.lift(x_p + Z * fres.y.head(ny)));
        sol.newton_iters = opts.max_newton - budget;
        return sol;
      }
      if (fres.kind == BarrierResult::Kind::OutOfBudget && worst >= -1e-12) {
        sol.status = Solution::Status::MaxIterations;
        finish(pre.lift(x_p + Z * fres.y.head(ny)));
        sol.newton_iters = opts.max_newton - budget;
        return sol;
      }
      y = fres.y.head(ny);
    }

    // The initial path parameter has to match where the start point sits.
    // A start near the optimum needs a large t: centering at t = 1 would
    // drag it back toward the analytic center, destroying the warmth. A far
    // start on a large-objective program needs a small t: at t = 1 the first
    // centering problem is already nearly the full problem, and damped
    // Newton can spend hundreds of iterations crossing a long boundary arc
    // to reach its minimizer. The least-squares fit of the centrality
    // condition t*grad_f + grad_phi = 0 picks the t whose central point is
    // nearest to where we are now, which handles both extremes.
    double t0 = 1.0;
    if (!bp.cons.empty()) {
      const double m0 = static_cast<double>(bp.cons.size());
      // Scale-free default: make the first gap comparable to the objective
      // itself, so a large-objective program starts gently instead of asking
      // the first centering to solve nearly the full problem.
      double pick = m0 / (1.0 + std::abs(bp.objective(y)));
      const Eigen::VectorXd a = bp.P * y + bp.q;
      Eigen::VectorXd b = Eigen::VectorXd::Zero(ny);
      for (const auto& con : bp.cons) b += con.grad(y) / (-con.eval(y));
      const double aa = a.squaredNorm();
      if (aa > 0.0) {
        const double fit = -a.dot(b) / aa;
        if (std::isfinite(fit)) pick = std::max(pick, fit);
      }
      // Same overshoot cap as the path loop: a near-optimal start can fit a
      // t far beyond what the tolerance needs, and precision is best at the
      // smallest sufficient t.
      const double t_need = m0 / (opts.tol * (1.0 + std::abs(bp.objective(y))));
      t0 = std::min(std::clamp(pick, 1e-6, 1e9), 1.05 * t_need);
    }

    // ---- Main phase. ----
    mres = barrier_minimize(bp, y, opts.tol, opts.barrier_mu, budget,
                            [](const Eigen::VectorXd&) { return false; }, t0);
    if (mres.kind == BarrierResult::Kind::Converged || !from_warm || budget <= 0) break;
  }
  sol.newton_iters = opts.max_newton - budget;

  switch (mres.kind) {
    case BarrierResult::Kind::Converged:
      sol.status = Solution::Status::Optimal;
      break;
    case BarrierResult::Kind::OutOfBudget:
      sol.status = Solution::Status::MaxIterations;
      break;
    case BarrierResult::Kind::NumericalFailure:
      sol.status = Solution::Status::IllConditioned;
      break;
  }

  // Barrier multipliers mu_k = 1 / (t * (-g_k)), un-scaled back to the
  // original row scaling.
  const double t = mres.t_final;
  for (const auto& con : bp.cons) {
    const double gv = con.eval(mres.y);
    if (gv >= 0.0) continue;
    const double mu = 1.0 / (t * (-gv));
    if (con.from_quad)
      sol.mu_quad(con.orig_index) = mu;  // quad rows were rescaled by presolve
    else
      sol.mu_lin(con.orig_index) = mu;
  }
  // Presolve rescaled constraint rows; recover original-scale multipliers.
  {
    const Eigen::VectorXd& xf = pre.fixed_values;
    for (int k : quad_map) {
      const auto& qc = prog.quad_ineq[k];
      const Eigen::MatrixXd Qs = symmetrized(qc.Q);
      Eigen::MatrixXd Qsub(nredvars, nredvars);
      for (int i = 0; i < nredvars; ++i)
        for (int j = 0; j < nredvars; ++j) Qsub(i, j) = Qs(pre.free_index[i], pre.free_index[j]);
      Eigen::VectorXd lsub(nredvars);
      {
        const Eigen::VectorXd lfull = qc.l + 2.0 * (Qs * xf);
        for (int i = 0; i < nredvars; ++i) lsub(i) = lfull(pre.free_index[i]);
      }
      const double rr = qc.r - xf.dot(Qs * xf) - qc.l.dot(xf);
      const double mag = std::max({absmax(Qsub), absmax(lsub), std::abs(rr)});
      if (mag > 0.0) sol.mu_quad(k) /= mag;
    }
    for (int r : lin_map) {
      Eigen::VectorXd grow(nredvars);
      for (int i = 0; i < nredvars; ++i) grow(i) = prog.G(r, pre.free_index[i]);
      const double s = grow.norm();
      if (s > 0.0) sol.mu_lin(r) /= s;
    }
  }

  finish(pre.lift(x_p + Z * mres.y));
  return sol;
}

}  // namespace ccp
