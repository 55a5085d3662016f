#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "dco/problem.hpp"
#include "dco/subsolver.hpp"

namespace dco {

struct KktResiduals {
  double stationarity = 0.0;
  double eq_residual = 0.0;
  double ineq_violation = 0.0;
  double complementarity = 0.0;
  double zero_sum_v = 0.0;
  double zero_sum_z = 0.0;
};

/// Centralized optimum with the per-agent allocations that certify it:
/// A_i x_i* - b_i - v_i* = 0 per agent and both allocation families sum to
/// zero across agents.
struct ReferenceSolution {
  Eigen::VectorXd x_star;  // stacked
  double f_star = 0.0;
  Eigen::VectorXd u_star;
  Eigen::VectorXd y_star;
  std::vector<Eigen::VectorXd> v_star;
  std::vector<Eigen::VectorXd> z_star;
  KktResiduals residuals;

  DualPoint zeta_star() const { return {u_star, y_star}; }
};

struct CentralizedOptions {
  double tol = 1e-10;
  double rho0 = 100.0;
  double rho_growth = 10.0;
  double rho_max = 1e7;
  int max_outer = 500;
  /// Residual-reduction factor an outer iteration must beat to keep rho.
  double stall_factor = 0.2;
  InnerSolveParams inner{1e-12, 200000, false, false};
};

ReferenceSolution solve_centralized(const ProblemInstance& instance, double tol = 1e-10);
ReferenceSolution solve_centralized(const ProblemInstance& instance,
                                    const CentralizedOptions& options);

/// Dense factorization of the equality-constrained quadratic KKT system
/// [blockdiag(Q_i), A'; A, 0] [x; u] = [-r; sum b_i]. Requires every agent
/// to be a pure quadratic (no l1 part) and q = 0.
Eigen::VectorXd solve_kkt_small(const ProblemInstance& instance);

struct MomOptions {
  double rho = 1.0;
  long max_outer = 500;
  double tol = 1e-10;
  /// >= 0 runs exactly this many iterations with no convergence stop.
  long fixed_iterations = -1;
  InnerSolveParams inner;
  Eigen::VectorXd x0, u0, y0;  // size 0 = zeros
};

struct MomResult {
  Eigen::VectorXd x, u, y;
  long iterations = 0;
  bool converged = false;
  double eq_residual = 0.0;
  double ineq_violation = 0.0;
};

/// Classical method of multipliers on one (possibly stacked) agent; the
/// degenerate single-agent case of the distributed algorithm.
MomResult method_of_multipliers(
    const AgentProblem& agent, const MomOptions& options,
    const std::function<void(long, const Eigen::VectorXd&, const Eigen::VectorXd&,
                             const Eigen::VectorXd&)>& on_iteration = nullptr);

/// phi_i at each agent's dual point, evaluated against (v_i*, z_i*).
/// Throws SolverFailure when any inner solve misses its budget.
std::vector<double> per_agent_dual_values(const ProblemInstance& instance,
                                          const ReferenceSolution& ref,
                                          const std::vector<DualPoint>& zetas,
                                          const InnerSolveParams& inner,
                                          const std::vector<Eigen::VectorXd>* warm_starts = nullptr);

/// sum_i (phi_i(zeta*) - phi_i(zeta_i)). Small negative values from inner
/// solve noise (within -10 tol) clamp to zero; anything more negative throws.
double dual_gap(const ProblemInstance& instance, const ReferenceSolution& ref,
                const std::vector<DualPoint>& zetas, const InnerSolveParams& inner);

/// Clamping rule shared by dual_gap and the simulator's sampled gaps.
double clamp_dual_gap(double gap, double tol);

}  // namespace dco
