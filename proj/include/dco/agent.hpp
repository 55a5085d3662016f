#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "dco/graph.hpp"
#include "dco/problem.hpp"
#include "dco/subsolver.hpp"

namespace dco {

/// One agent's iterates. The y block stays componentwise nonnegative at
/// every round; v and z start at zero.
struct AgentState {
  Eigen::VectorXd x;
  Eigen::VectorXd u;      // equality multiplier estimate
  Eigen::VectorXd y;      // inequality multiplier estimate, >= 0
  Eigen::VectorXd p_mix;  // post-mixing equality dual
  Eigen::VectorXd q_mix;  // post-mixing inequality dual
  Eigen::VectorXd v;      // equality allocation
  Eigen::VectorXd z;      // inequality allocation

  /// u - p_mix and y - q_mix as computed during mixing. allocation_update
  /// consumes these when present; going through the differences keeps the
  /// allocations zero-sum to machine precision.
  Eigen::VectorXd pending_realloc_u;
  Eigen::VectorXd pending_realloc_y;
};

struct RunParams {
  double rho = 0.0;
  double gamma = 0.0;
  long rounds = 0;
};

/// x = x0 (or zeros), u = u0 (or zeros), y = max(y0, 0); p_mix/q_mix start
/// equal to u/y (round-0 mixing is the identity) and v = z = 0.
AgentState make_initial_state(const AgentProblem& agent, const Eigen::VectorXd* x0 = nullptr,
                              const Eigen::VectorXd* u0 = nullptr,
                              const Eigen::VectorXd* y0 = nullptr);

/// Primal and dual steps of one round:
/// x+ = argmin of the augmented Lagrangian at (p_mix, q_mix, v, z),
/// u+ = p_mix + rho (A x+ - b - v), y+ = [q_mix + rho (g(x+) - z)]_+.
/// Warm starts from the previous x. Throws SolverFailure when the inner
/// solve exhausts its budget.
SolveResult local_update(AgentState& state, const AgentProblem& agent, double rho,
                         const InnerSolveParams& inner);

struct MixResult {
  Eigen::VectorXd p;        // sum_j W(i,j) u_j
  Eigen::VectorXd q;        // sum_j W(i,j) y_j
  Eigen::VectorXd delta_u;  // u_i - p
  Eigen::VectorXd delta_y;  // y_i - q
};

/// Mixes duals through W's row i, reading in-neighbors only. When W carries
/// its permutation decomposition the deltas are formed as
/// sum_m alpha_m (u_i - u_{perm_m(i)}), which sums to zero across agents up
/// to rounding that is relative to the dual disagreement, not to its size.
MixResult mix_duals_detailed(const std::vector<Eigen::VectorXd>& all_u,
                             const std::vector<Eigen::VectorXd>& all_y, const WeightMatrix& w,
                             int i);

std::pair<Eigen::VectorXd, Eigen::VectorXd> mix_duals(const std::vector<Eigen::VectorXd>& all_u,
                                                      const std::vector<Eigen::VectorXd>& all_y,
                                                      const WeightMatrix& w, int i);

/// v += gamma (u - p), z += gamma (y - q), preferring the deltas stored by
/// the mixing step when available.
void allocation_update(AgentState& state, double gamma);

}  // namespace dco
