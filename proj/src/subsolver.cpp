#include "dco/subsolver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dco/errors.hpp"

namespace dco {
namespace {

double prox_value(const ProxObjective* prox, const Eigen::VectorXd& x) {
  return prox && prox->value ? prox->value(x) : 0.0;
}

Eigen::VectorXd apply_prox(const ProxObjective* prox, const Eigen::VectorXd& v, double t) {
  return prox && prox->prox ? prox->prox(v, t) : v;
}

void check_alm_dims(const AgentProblem& agent, const Eigen::VectorXd& p_mix,
                    const Eigen::VectorXd& q_mix, const Eigen::VectorXd& v,
                    const Eigen::VectorXd& z, const char* who) {
  if (p_mix.size() != agent.A.rows() || v.size() != agent.A.rows())
    throw std::invalid_argument(std::string(who) + ": equality dual/allocation dimension mismatch");
  if (q_mix.size() != agent.inequality.dim || z.size() != agent.inequality.dim)
    throw std::invalid_argument(std::string(who) + ": inequality dual/allocation dimension mismatch");
}

/// Proximal subgradient method with diminishing steps; only used when the
/// inequality has no gradient oracle and the caller opted in.
SolveResult proximal_subgradient_minimize(
    const std::function<double(const Eigen::VectorXd&)>& value,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& subgradient,
    const ProxObjective* prox, Eigen::VectorXd x0, double step_scale,
    const InnerSolveParams& params) {
  SolveResult out;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd best = x;
  double best_value = value(x) + prox_value(prox, x);
  const long budget = 10L * params.max_iter;
  for (long it = 0; it < budget; ++it) {
    const double step = step_scale / std::sqrt(static_cast<double>(it + 1));
    x = apply_prox(prox, x - step * subgradient(x), step);
    const double val = value(x) + prox_value(prox, x);
    if (val < best_value) {
      best_value = val;
      best = x;
    }
    out.iterations = static_cast<int>(std::min<long>(it + 1, INT32_MAX));
  }
  out.x = best;
  out.residual = (best - apply_prox(prox, best - subgradient(best), 1.0)).norm();
  out.converged = out.residual <= params.tol;
  return out;
}

}  // namespace

SolveResult apg_minimize(const CompositeProblem& problem, Eigen::VectorXd x0,
                         const InnerSolveParams& params) {
  if (!(params.tol > 0.0)) throw std::invalid_argument("apg_minimize: tol must be positive");

  double step_l = std::max(problem.lipschitz_estimate, 1e-12);
  const ProxObjective* prox = problem.prox;
  SolveResult out;

  Eigen::VectorXd z = std::move(x0);
  double sz = problem.smooth_value(z);
  double fz = sz + prox_value(prox, z);
  Eigen::VectorXd gz = problem.smooth_gradient(z);

  // The result is the lowest-residual iterate seen; the objective log is the
  // running best value, which the restart rule keeps non-increasing.
  Eigen::VectorXd best = z;
  double best_residual = (z - apply_prox(prox, z - gz, 1.0)).norm();
  double f_mono = fz;
  if (params.record_objectives) out.objectives.push_back(f_mono);

  Eigen::VectorXd yv = z;
  bool y_is_z = true;  // yv aliases the last iterate, gradient already known
  double t = 1.0;
  int since_best = 0;
  // No best-residual improvement for this long means the numerical floor;
  // stop burning iterations there.
  const int stall_window = std::clamp(params.max_iter / 10, 500, 5000);

  // One backtracked prox step from (base, gbase); returns (x_new, smooth(x_new)).
  // step_l doubles while the majorization fails and relaxes again between
  // iterations, so a pessimistic seed does not pin the step size down.
  const auto take_step = [&](const Eigen::VectorXd& base, const Eigen::VectorXd& gbase,
                             double sbase) {
    for (;;) {
      Eigen::VectorXd xn = apply_prox(prox, base - gbase / step_l, 1.0 / step_l);
      const Eigen::VectorXd d = xn - base;
      const double sn = problem.smooth_value(xn);
      const double quad = sbase + gbase.dot(d) + 0.5 * step_l * d.squaredNorm();
      if (sn <= quad + 1e-12 * (1.0 + std::abs(quad)) || step_l > 1e30)
        return std::make_pair(std::move(xn), sn);
      step_l *= 2.0;
    }
  };

  int it = 0;
  for (; it < params.max_iter && best_residual > params.tol && since_best <= stall_window; ++it) {
    Eigen::VectorXd zn;
    double szn;
    if (y_is_z) {
      std::tie(zn, szn) = take_step(z, gz, sz);
    } else {
      const double sy = problem.smooth_value(yv);
      const Eigen::VectorXd gy = problem.smooth_gradient(yv);
      std::tie(zn, szn) = take_step(yv, gy, sy);
    }
    const double fzn = szn + prox_value(prox, zn);

    // Momentum restarts: objective increase (beyond evaluation noise) or
    // extrapolation against descent. The step itself is always kept.
    if (fzn > fz + 1e-10 * (1.0 + std::abs(fz)) || (yv - zn).dot(zn - z) > 0.0) t = 1.0;

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    yv = zn + ((t - 1.0) / t_next) * (zn - z);
    y_is_z = (t == 1.0);
    t = t_next;
    z = std::move(zn);
    sz = szn;
    fz = fzn;
    gz = problem.smooth_gradient(z);

    const double residual = (z - apply_prox(prox, z - gz, 1.0)).norm();
    if (residual < best_residual) {
      best_residual = residual;
      best = z;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (fz < f_mono) f_mono = fz;
    if (params.record_objectives) out.objectives.push_back(f_mono);
    step_l = std::max(step_l * 0.9, 1e-12);
  }

  out.x = std::move(best);
  out.residual = best_residual;
  out.iterations = it;
  out.converged = best_residual <= params.tol;
  return out;
}

Eigen::VectorXd lagrangian_gradient(const AgentProblem& agent, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
  Eigen::VectorXd grad = agent.smooth.gradient(x);
  if (u.size() > 0) grad.noalias() += agent.A.transpose() * u;
  if (agent.inequality.dim > 0 && y.size() > 0)
    grad.noalias() += agent.inequality.jacobian(x).transpose() * y;
  return grad;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> induced_multipliers(
    const AgentProblem& agent, const Eigen::VectorXd& x, const Eigen::VectorXd& p_mix,
    const Eigen::VectorXd& q_mix, const Eigen::VectorXd& v, const Eigen::VectorXd& z,
    double rho) {
  Eigen::VectorXd u = p_mix + rho * (agent.A * x - agent.b - v);
  Eigen::VectorXd y;
  if (agent.inequality.dim > 0)
    y = (q_mix + rho * (agent.inequality.value(x) - z)).cwiseMax(0.0);
  else
    y = Eigen::VectorXd(0);
  return {std::move(u), std::move(y)};
}

SolveResult minimize_augmented_lagrangian(const AgentProblem& agent,
                                          const Eigen::VectorXd& p_mix,
                                          const Eigen::VectorXd& q_mix,
                                          const Eigen::VectorXd& v, const Eigen::VectorXd& z,
                                          double rho, const InnerSolveParams& params,
                                          const Eigen::VectorXd* warm_start) {
  if (!(rho > 0.0)) throw std::invalid_argument("minimize_augmented_lagrangian: rho must be positive");
  check_alm_dims(agent, p_mix, q_mix, v, z, "minimize_augmented_lagrangian");

  const bool has_ineq = agent.inequality.dim > 0;
  if (has_ineq && !agent.inequality.differentiable && !params.allow_subgradient_fallback)
    throw SolverFailure(
        "minimize_augmented_lagrangian: inequality has no gradient oracle and the "
        "subgradient fallback is disabled");

  const auto smooth_value = [&agent, &p_mix, &q_mix, &v, &z, rho,
                             has_ineq](const Eigen::VectorXd& x) {
    const Eigen::VectorXd eq = agent.A * x - agent.b - v;
    double val = agent.smooth.value(x) + p_mix.dot(eq) + 0.5 * rho * eq.squaredNorm();
    if (has_ineq) {
      const Eigen::VectorXd w = q_mix + rho * (agent.inequality.value(x) - z);
      val += (w.cwiseMax(0.0).squaredNorm() - q_mix.squaredNorm()) / (2.0 * rho);
    }
    return val;
  };
  // The gradient through the induced multipliers: bit-identical to the
  // stationarity residual of L0 at (x, u(x), y(x)).
  const auto smooth_gradient = [&agent, &p_mix, &q_mix, &v, &z, rho](const Eigen::VectorXd& x) {
    const auto [u, y] = induced_multipliers(agent, x, p_mix, q_mix, v, z, rho);
    return lagrangian_gradient(agent, x, u, y);
  };

  const double a_norm = agent.operator_norm_A();
  double lip = agent.smooth.gradient_lipschitz + rho * a_norm * a_norm;
  if (has_ineq) {
    const double lg = agent.inequality.subgradient_bound;
    lip += rho * agent.inequality.dim * lg * lg +
           agent.inequality.curvature_bound * (q_mix.cwiseMax(0.0).sum() + 1.0);
  }

  Eigen::VectorXd x0 =
      warm_start && warm_start->size() == agent.dim ? *warm_start : Eigen::VectorXd::Zero(agent.dim);

  if (has_ineq && !agent.inequality.differentiable) {
    const auto subgradient = [&agent, &p_mix, &q_mix, &v, &z, rho](const Eigen::VectorXd& x) {
      const auto [u, y] = induced_multipliers(agent, x, p_mix, q_mix, v, z, rho);
      return lagrangian_gradient(agent, x, u, y);
    };
    return proximal_subgradient_minimize(smooth_value, subgradient, &agent.prox, std::move(x0),
                                         1.0 / (lip + 1.0), params);
  }

  CompositeProblem problem;
  problem.smooth_value = smooth_value;
  problem.smooth_gradient = smooth_gradient;
  problem.prox = &agent.prox;
  problem.lipschitz_estimate = lip;
  return apg_minimize(problem, std::move(x0), params);
}

double stationarity_residual(const AgentProblem& agent, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
  if (x.size() != agent.dim)
    throw std::invalid_argument("stationarity_residual: x dimension mismatch");
  if (u.size() != agent.A.rows() || y.size() != agent.inequality.dim)
    throw std::invalid_argument("stationarity_residual: multiplier dimension mismatch");
  if (y.size() > 0 && y.minCoeff() < 0.0)
    throw std::invalid_argument("stationarity_residual: y must be nonnegative");
  const Eigen::VectorXd grad = lagrangian_gradient(agent, x, u, y);
  return (x - apply_prox(&agent.prox, x - grad, 1.0)).norm();
}

DualValue dual_function_value(const AgentProblem& agent, const DualPoint& zeta,
                              const Eigen::VectorXd& v_ref, const Eigen::VectorXd& z_ref,
                              const InnerSolveParams& params, const Eigen::VectorXd* warm_start) {
  if (zeta.u.size() != agent.A.rows())
    throw std::invalid_argument("dual_function_value: u dimension mismatch");
  if (zeta.y.size() != agent.inequality.dim)
    throw std::invalid_argument("dual_function_value: y dimension mismatch");
  if (v_ref.size() != agent.A.rows() || z_ref.size() != agent.inequality.dim)
    throw std::invalid_argument("dual_function_value: reference allocation dimension mismatch");

  const Eigen::VectorXd u = zeta.u;
  const Eigen::VectorXd y = zeta.y.size() > 0 ? zeta.y.cwiseMax(0.0) : zeta.y;
  const bool has_ineq = agent.inequality.dim > 0;

  const auto smooth_value = [&agent, &u, &y, &v_ref, &z_ref, has_ineq](const Eigen::VectorXd& x) {
    double val = agent.smooth.value(x) + u.dot(agent.A * x - agent.b - v_ref);
    if (has_ineq) val += y.dot(agent.inequality.value(x) - z_ref);
    return val;
  };
  const auto smooth_gradient = [&agent, &u, &y](const Eigen::VectorXd& x) {
    return lagrangian_gradient(agent, x, u, y);
  };

  double lip = agent.smooth.gradient_lipschitz;
  if (has_ineq) lip += agent.inequality.curvature_bound * y.lpNorm<1>();

  Eigen::VectorXd x0 =
      warm_start && warm_start->size() == agent.dim ? *warm_start : Eigen::VectorXd::Zero(agent.dim);

  CompositeProblem problem;
  problem.smooth_value = smooth_value;
  problem.smooth_gradient = smooth_gradient;
  problem.prox = &agent.prox;
  problem.lipschitz_estimate = lip;
  SolveResult res = apg_minimize(problem, std::move(x0), params);

  DualValue out;
  out.value = smooth_value(res.x) + agent.prox.value(res.x);
  out.minimizer = std::move(res.x);
  out.residual = res.residual;
  out.iterations = res.iterations;
  out.converged = res.converged;
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> dual_gradient(
    const AgentProblem& agent, const DualPoint& zeta, const Eigen::VectorXd& v_ref,
    const Eigen::VectorXd& z_ref, const InnerSolveParams& params,
    const Eigen::VectorXd* warm_start) {
  const DualValue eval = dual_function_value(agent, zeta, v_ref, z_ref, params, warm_start);
  if (!eval.converged)
    throw SolverFailure("dual_gradient: inner solve exceeded its iteration budget (residual=" +
                        std::to_string(eval.residual) + ")");
  Eigen::VectorXd grad_u = agent.A * eval.minimizer - agent.b - v_ref;
  Eigen::VectorXd grad_y;
  if (agent.inequality.dim > 0)
    grad_y = agent.inequality.value(eval.minimizer) - z_ref;
  else
    grad_y = Eigen::VectorXd(0);
  return {std::move(grad_u), std::move(grad_y)};
}

}  // namespace dco
