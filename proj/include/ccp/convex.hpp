#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace ccp {

/// Small dense convex program:
///
///   minimize    0.5 x'P x + q'x + c
///   subject to  A_eq x = b_eq
///               x'Q x + l'x <= r     (one entry of quad_ineq each, Q PSD)
///               G x <= g             (row-wise linear inequalities)
///
/// P and the Q blocks are symmetrized and nudged by +1e-10 I internally, so
/// callers may pass anything numerically PSD.
struct ConvexProgram {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  double c = 0.0;

  Eigen::MatrixXd A_eq;  // may have zero rows
  Eigen::VectorXd b_eq;

  struct QuadCon {
    Eigen::MatrixXd Q;
    Eigen::VectorXd l;
    double r = 0.0;
  };
  std::vector<QuadCon> quad_ineq;

  Eigen::MatrixXd G;  // may have zero rows
  Eigen::VectorXd g;

  int n() const { return static_cast<int>(P.rows()); }

  /// Throws std::invalid_argument on any dimension mismatch.
  void require_consistent() const;
};

struct KktResiduals {
  double stationarity = 0.0;  ///< inf-norm of the dual stationarity equation
  double primal_eq = 0.0;     ///< inf-norm of A_eq x - b_eq
  double primal_ineq = 0.0;   ///< largest positive constraint violation
  double comp_slack = 0.0;    ///< max_k |mu_k * slack_k|
  double duality_gap = 0.0;   ///< sum_k mu_k * slack_k
};

struct Solution {
  enum class Status {
    Optimal,
    Infeasible,      ///< feasibility phase bottomed out above its tolerance
    MaxIterations,   ///< Newton budget exhausted; x is the best iterate
    IllConditioned,  ///< factorizations kept failing despite regularization
  };

  Status status = Status::IllConditioned;
  Eigen::VectorXd x;
  double objective = 0.0;
  Eigen::VectorXd mu_quad;  ///< one multiplier per quad_ineq entry (0 if presolved away)
  Eigen::VectorXd mu_lin;   ///< one per linear inequality row
  Eigen::VectorXd nu_eq;    ///< one per equality row
  KktResiduals kkt;
  int newton_iters = 0;
};

const char* to_string(Solution::Status s);

struct SolveOptions {
  double tol = 1e-8;     ///< duality-gap target, relative to 1 + |objective|
  int max_newton = 400;  ///< total Newton-step budget across both phases
  double barrier_mu = 20.0;
  /// Optional warm start. It is projected onto the equality manifold; when
  /// the projection is strictly feasible the feasibility phase is skipped.
  std::optional<Eigen::VectorXd> x0;
};

/// Presolve output. `program` has duplicate/dependent equality rows removed,
/// variables pinned by matching bounds eliminated, and constraint rows
/// rescaled to unit norm. Objective values of corresponding points are
/// unchanged (the constant term absorbs eliminated variables).
struct PresolvedProgram {
  ConvexProgram program;
  bool provably_infeasible = false;  ///< e.g. 0 = b with b != 0, or crossed bounds
  std::string note;                  ///< human-readable reason when infeasible

  std::vector<int> free_index;       ///< reduced column -> original column
  std::vector<char> fixed_mask;      ///< size n_original
  Eigen::VectorXd fixed_values;      ///< size n_original, valid where fixed

  /// Scatter a reduced solution back to original coordinates.
  Eigen::VectorXd lift(const Eigen::VectorXd& x_reduced) const;
};

PresolvedProgram presolve(const ConvexProgram& prog);

/// Log-barrier interior-point solve with direct equality elimination and a
/// slack-minimizing feasibility phase (declared Infeasible when the optimal
/// slack stays above 10*tol). Deterministic: identical inputs produce
/// bit-identical Solutions.
Solution solve(const ConvexProgram& prog, const SolveOptions& opts = {});

}  // namespace ccp
