#pragma once

#include <Eigen/Dense>

#include <functional>
#include <utility>
#include <vector>

#include "dco/problem.hpp"

namespace dco {

struct InnerSolveParams {
  /// Target on the unit-step prox-gradient residual.
  double tol = 1e-9;
  int max_iter = 5000;
  /// Proximal subgradient fallback for nonsmooth inequalities (10x budget).
  bool allow_subgradient_fallback = false;
  /// Record the objective value after every accepted iterate.
  bool record_objectives = false;
};

/// Multiplier pair zeta = (u, y); y is componentwise nonnegative.
struct DualPoint {
  Eigen::VectorXd u;
  Eigen::VectorXd y;
};

struct SolveResult {
  Eigen::VectorXd x;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objectives;
};

/// Generic composite problem min smooth(x) + prox-part(x).
struct CompositeProblem {
  std::function<double(const Eigen::VectorXd&)> smooth_value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> smooth_gradient;
  const ProxObjective* prox = nullptr;  // nullptr = no nonsmooth part
  double lipschitz_estimate = 1.0;      // seed for backtracking
};

/// Accelerated proximal gradient with backtracking and restart on objective
/// increase. Terminates on the unit-step prox-gradient residual; when the
/// budget runs out the best (last) iterate is returned with converged=false.
SolveResult apg_minimize(const CompositeProblem& problem, Eigen::VectorXd x0,
                         const InnerSolveParams& params);

/// Gradient of the smooth part of the local Lagrangian
/// L0(x, u, y) = f(x) + <u, Ax - b - v> + <y, g(x) - z> at fixed multipliers
/// (the v/z shifts are constant in x).
Eigen::VectorXd lagrangian_gradient(const AgentProblem& agent, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& u, const Eigen::VectorXd& y);

/// Multipliers the dual updates would induce at x:
/// u = p_mix + rho (Ax - b - v), y = [q_mix + rho (g(x) - z)]_+.
std::pair<Eigen::VectorXd, Eigen::VectorXd> induced_multipliers(
    const AgentProblem& agent, const Eigen::VectorXd& x, const Eigen::VectorXd& p_mix,
    const Eigen::VectorXd& q_mix, const Eigen::VectorXd& v, const Eigen::VectorXd& z,
    double rho);

/// Minimizes the local augmented Lagrangian over x. The returned iterate
/// satisfies the unit-step stationarity target, measured through the
/// induced multipliers so the fixed point matches the dual updates exactly.
SolveResult minimize_augmented_lagrangian(const AgentProblem& agent,
                                          const Eigen::VectorXd& p_mix,
                                          const Eigen::VectorXd& q_mix,
                                          const Eigen::VectorXd& v, const Eigen::VectorXd& z,
                                          double rho, const InnerSolveParams& params,
                                          const Eigen::VectorXd* warm_start = nullptr);

/// Norm of the unit-step prox-gradient mapping of L0(., u, y) at x; zero
/// exactly at the minimizer.
double stationarity_residual(const AgentProblem& agent, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& u, const Eigen::VectorXd& y);

struct DualValue {
  double value = 0.0;
  Eigen::VectorXd minimizer;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// phi_i(zeta) = min_x f(x) + <u, Ax - b - v_ref> + <y, g(x) - z_ref>.
/// Negative roundoff in y is clamped at exactly zero before solving.
DualValue dual_function_value(const AgentProblem& agent, const DualPoint& zeta,
                              const Eigen::VectorXd& v_ref, const Eigen::VectorXd& z_ref,
                              const InnerSolveParams& params,
                              const Eigen::VectorXd* warm_start = nullptr);

/// (A x^ - b - v_ref, g(x^) - z_ref) at the dual-function minimizer x^.
std::pair<Eigen::VectorXd, Eigen::VectorXd> dual_gradient(
    const AgentProblem& agent, const DualPoint& zeta, const Eigen::VectorXd& v_ref,
    const Eigen::VectorXd& z_ref, const InnerSolveParams& params,
    const Eigen::VectorXd* warm_start = nullptr);

}  // namespace dco
