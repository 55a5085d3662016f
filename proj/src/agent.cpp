#include "dco/agent.hpp"

#include <stdexcept>
#include <string>

#include "dco/errors.hpp"

namespace dco {

AgentState make_initial_state(const AgentProblem& agent, const Eigen::VectorXd* x0,
                              const Eigen::VectorXd* u0, const Eigen::VectorXd* y0) {
  const auto p = agent.A.rows();
  const auto q = agent.inequality.dim;
  AgentState st;
  st.x = x0 ? *x0 : Eigen::VectorXd::Zero(agent.dim);
  st.u = u0 ? *u0 : Eigen::VectorXd::Zero(p);
  st.y = y0 ? Eigen::VectorXd(y0->cwiseMax(0.0)) : Eigen::VectorXd(Eigen::VectorXd::Zero(q));
  if (st.x.size() != agent.dim || st.u.size() != p || st.y.size() != q)
    throw std::invalid_argument("make_initial_state: initial vector dimension mismatch");
  st.p_mix = st.u;
  st.q_mix = st.y;
  st.v = Eigen::VectorXd::Zero(p);
  st.z = Eigen::VectorXd::Zero(q);
  return st;
}

SolveResult local_update(AgentState& state, const AgentProblem& agent, double rho,
                         const InnerSolveParams& inner) {
  SolveResult res = minimize_augmented_lagrangian(
      agent, state.p_mix, state.q_mix, state.v, state.z, rho, inner,
      state.x.size() == agent.dim ? &state.x : nullptr);
  if (!res.converged)
    throw SolverFailure("local_update: inner solve exceeded max iterations (residual=" +
                        std::to_string(res.residual) + ")");
  state.x = res.x;
  auto [u, y] = induced_multipliers(agent, state.x, state.p_mix, state.q_mix, state.v, state.z, rho);
  state.u = std::move(u);
  state.y = std::move(y);
  state.pending_realloc_u.resize(0);
  state.pending_realloc_y.resize(0);
  return res;
}

MixResult mix_duals_detailed(const std::vector<Eigen::VectorXd>& all_u,
                             const std::vector<Eigen::VectorXd>& all_y, const WeightMatrix& w,
                             int i) {
  const int n = w.size();
  if (static_cast<int>(all_u.size()) != n || static_cast<int>(all_y.size()) != n)
    throw std::invalid_argument("mix_duals: need one dual pair per agent");
  if (i < 0 || i >= n) throw std::invalid_argument("mix_duals: unknown agent id");
  for (int j = 1; j < n; ++j)
    if (all_u[j].size() != all_u[0].size() || all_y[j].size() != all_y[0].size())
      throw std::invalid_argument("mix_duals: ragged dual dimensions");

  MixResult out;
  if (w.has_decomposition()) {
    out.delta_u = Eigen::VectorXd::Zero(all_u[i].size());
    out.delta_y = Eigen::VectorXd::Zero(all_y[i].size());
    for (std::size_t m = 0; m < w.permutations.size(); ++m) {
      const int src = w.permutations[m][static_cast<std::size_t>(i)];
      if (src == i) continue;  // exact zero term
      out.delta_u += w.mixing_weights[m] * (all_u[i] - all_u[src]);
      out.delta_y += w.mixing_weights[m] * (all_y[i] - all_y[src]);
    }
    out.p = all_u[i] - out.delta_u;
    out.q = all_y[i] - out.delta_y;
  } else {
    out.p = Eigen::VectorXd::Zero(all_u[i].size());
    out.q = Eigen::VectorXd::Zero(all_y[i].size());
    for (int j = 0; j < n; ++j) {
      const double wij = w.entries(i, j);
      if (wij == 0.0) continue;
      out.p += wij * all_u[j];
      out.q += wij * all_y[j];
    }
    out.delta_u = all_u[i] - out.p;
    out.delta_y = all_y[i] - out.q;
  }
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> mix_duals(const std::vector<Eigen::VectorXd>& all_u,
                                                      const std::vector<Eigen::VectorXd>& all_y,
                                                      const WeightMatrix& w, int i) {
  MixResult r = mix_duals_detailed(all_u, all_y, w, i);
  return {std::move(r.p), std::move(r.q)};
}

void allocation_update(AgentState& state, double gamma) {
  const Eigen::VectorXd du = state.pending_realloc_u.size() == state.u.size()
                                 ? state.pending_realloc_u
                                 : Eigen::VectorXd(state.u - state.p_mix);
  const Eigen::VectorXd dy = state.pending_realloc_y.size() == state.y.size()
                                 ? state.pending_realloc_y
                                 : Eigen::VectorXd(state.y - state.q_mix);
  state.v += gamma * du;
  state.z += gamma * dy;
  state.pending_realloc_u.resize(0);
  state.pending_realloc_y.resize(0);
}

}  // namespace dco
