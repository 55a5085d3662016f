#include "doctest.h"

#include <random>

#include "dco/errors.hpp"
#include "dco/problem.hpp"
#include "dco/reference.hpp"

using namespace dco;

namespace {

Eigen::VectorXd scalar(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}

// Closed form for the quadratic-equality family: x_i* = c_i + (b - sum c)/n.
Eigen::VectorXd quadratic_equality_optimum(const std::vector<Eigen::VectorXd>& centers,
                                           const Eigen::VectorXd& b) {
  Eigen::VectorXd shift = b;
  for (const auto& c : centers) shift -= c;
  shift /= static_cast<double>(centers.size());
  Eigen::VectorXd x(static_cast<Eigen::Index>(centers.size()) * b.size());
  for (std::size_t i = 0; i < centers.size(); ++i)
    x.segment(static_cast<Eigen::Index>(i) * b.size(), b.size()) = centers[i] + shift;
  return x;
}

}  // namespace

TEST_CASE("centralized solve matches the closed form on the quadratic family") {
  const std::vector<Eigen::VectorXd> centers{scalar(1), scalar(2), scalar(3)};
  const ProblemInstance inst = make_quadratic_equality_instance(3, centers, scalar(9));
  const ReferenceSolution ref = solve_centralized(inst, 1e-10);
  const Eigen::VectorXd expected = quadratic_equality_optimum(centers, scalar(9));
  CHECK((ref.x_star - expected).norm() <= 1e-8);
  CHECK(ref.x_star(0) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(ref.x_star(1) == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(ref.x_star(2) == doctest::Approx(4.0).epsilon(1e-8));
  // geometric multiplier of the coupled equality: u* = c_i - x_i* = -1
  CHECK(ref.u_star(0) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("inactive constraints leave the multipliers at zero") {
  // Unconstrained minimizer c is feasible: A = 0 rows? Use A = I with b = c
  // so the equality is satisfied at the minimizer, plus a slack inequality.
  InstanceData data;
  data.p = 1;
  data.q = 1;
  data.mu = 1.0;
  data.operating_radius = 3.0;
  AgentData ad;
  ad.Q = Eigen::MatrixXd::Identity(1, 1);
  ad.r = scalar(-1.0);  // minimizer at x = 1
  ad.A = Eigen::MatrixXd::Identity(1, 1);
  ad.b = scalar(1.0);
  ad.center = scalar(1.0);
  ad.radii = scalar(2.0);  // g(1) = -4 < 0
  data.agents.push_back(ad);
  const ProblemInstance inst{std::move(data)};
  const ReferenceSolution ref = solve_centralized(inst, 1e-10);
  CHECK(ref.x_star(0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(ref.u_star.norm() <= 1e-8);
  CHECK(ref.y_star.norm() <= 1e-8);
}

TEST_CASE("reference solution satisfies the KKT allocation identities") {
  const ProblemInstance inst = make_benchmark_instance(6, 4, 1, 13);
  const ReferenceSolution ref = solve_centralized(inst, 1e-10);

  CHECK(ref.residuals.stationarity <= 1e-6);
  CHECK(ref.residuals.eq_residual <= 1e-6);
  CHECK(ref.residuals.ineq_violation <= 1e-6);
  CHECK(ref.residuals.complementarity <= 1e-6);

  Eigen::VectorXd v_sum = Eigen::VectorXd::Zero(inst.p());
  Eigen::VectorXd z_sum = Eigen::VectorXd::Zero(inst.q());
  for (int i = 0; i < inst.n_agents(); ++i) {
    const AgentProblem& agent = inst.agent(i);
    const Eigen::VectorXd xi = inst.block(ref.x_star, i);
    // per-agent equality split is exact
    CHECK((agent.A * xi - agent.b - ref.v_star[i]).norm() <= 1e-12);
    // per-agent inequality split respects feasibility and slackness
    const Eigen::VectorXd slack = agent.inequality.value(xi) - ref.z_star[i];
    CHECK(slack.maxCoeff() <= 1e-6);
    CHECK(std::abs(ref.y_star.dot(slack)) <= 1e-6);
    v_sum += ref.v_star[i];
    z_sum += ref.z_star[i];
  }
  CHECK(v_sum.norm() <= 1e-6);
  CHECK(z_sum.norm() <= 1e-9);
  CHECK(ref.y_star.minCoeff() >= 0.0);
}

TEST_CASE("strong duality: the dual at zeta* meets f*") {
  const ProblemInstance inst = make_benchmark_instance(4, 3, 1, 29);
  const ReferenceSolution ref = solve_centralized(inst, 1e-10);
  InnerSolveParams inner;
  inner.tol = 1e-11;
  inner.max_iter = 50000;
  std::vector<DualPoint> star(static_cast<std::size_t>(inst.n_agents()), ref.zeta_star());
  const std::vector<double> phis = per_agent_dual_values(inst, ref, star, inner);
  double total = 0.0;
  for (double phi : phis) total += phi;
  CHECK(total == doctest::Approx(ref.f_star).epsilon(1e-5));
}

TEST_CASE("dual optimality: the summed dual gradient vanishes at zeta*") {
  const ProblemInstance inst = make_benchmark_instance(4, 3, 1, 29);
  const ReferenceSolution ref = solve_centralized(inst, 1e-10);
  InnerSolveParams inner;
  inner.tol = 1e-11;
  inner.max_iter = 50000;
  Eigen::VectorXd grad_u = Eigen::VectorXd::Zero(inst.p());
  Eigen::VectorXd grad_y = Eigen::VectorXd::Zero(inst.q());
  for (int i = 0; i < inst.n_agents(); ++i) {
    const auto [gu, gy] = dual_gradient(inst.agent(i), ref.zeta_star(), ref.v_star[i],
                                        ref.z_star[i], inner);
    grad_u += gu;
    grad_y += gy;
    // the equality block vanishes per agent (KKT split)
    CHECK(gu.norm() <= 1e-5);
  }
  CHECK(grad_u.norm() <= 1e-5);
  // y-block sums to sum g(x*) which is <= 0 and complementary to y*.
  CHECK(std::abs(ref.y_star.dot(grad_y)) <= 1e-5);
}

TEST_CASE("dense KKT oracle") {
  SUBCASE("hand example") {
    const std::vector<Eigen::VectorXd> centers{scalar(1), scalar(2), scalar(3)};
    const ProblemInstance inst = make_quadratic_equality_instance(3, centers, scalar(9));
    const Eigen::VectorXd x = solve_kkt_small(inst);
    CHECK(x(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(x(1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(x(2) == doctest::Approx(4.0).epsilon(1e-12));
  }
  SUBCASE("no coupling rows reduces to the unconstrained solve") {
    InstanceData data;
    data.p = 0;
    data.q = 0;
    data.mu = 1.0;
    AgentData ad;
    ad.Q = (Eigen::MatrixXd(2, 2) << 2, 0, 0, 4).finished();
    ad.r = (Eigen::VectorXd(2) << -2, -8).finished();
    ad.A = Eigen::MatrixXd(0, 2);
    ad.b = Eigen::VectorXd(0);
    data.agents.push_back(ad);
    const ProblemInstance inst{std::move(data)};
    const Eigen::VectorXd x = solve_kkt_small(inst);
    CHECK(x(0) == doctest::Approx(1.0));
    CHECK(x(1) == doctest::Approx(2.0));
  }
  SUBCASE("rejects instances outside its scope") {
    const ProblemInstance with_l1 = make_benchmark_instance(2, 2, 0, 3);
    CHECK_THROWS_AS(solve_kkt_small(with_l1), std::invalid_argument);
  }
  SUBCASE("cross-oracle agreement on random quadratic instances") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const ProblemInstance inst = make_random_quadratic_instance(4, 2, seed);
      const Eigen::VectorXd x_kkt = solve_kkt_small(inst);
      const ReferenceSolution ref = solve_centralized(inst, 1e-10);
      CHECK((ref.x_star - x_kkt).norm() <= 1e-7);
    }
  }
}

TEST_CASE("dual gap") {
  const ProblemInstance inst = make_benchmark_instance(3, 2, 1, 55);
  const ReferenceSolution ref = solve_centralized(inst, 1e-10);
  InnerSolveParams inner;
  inner.tol = 1e-11;
  inner.max_iter = 50000;
  SUBCASE("zero at the optimum") {
    std::vector<DualPoint> star(static_cast<std::size_t>(inst.n_agents()), ref.zeta_star());
    CHECK(dual_gap(inst, ref, star, inner) <= 1e-9);
  }
  SUBCASE("clamp policy") {
    CHECK(clamp_dual_gap(-0.5 * 10.0 * inner.tol, inner.tol) == 0.0);
    CHECK_THROWS_AS(clamp_dual_gap(-1.0, inner.tol), InvariantViolation);
  }
  SUBCASE("quadratic growth under scalar perturbation") {
    // Single agent, f = x^2/2, A = [1], b = 0: phi(u) = -u^2/2, u* = 0,
    // so the gap at u* + delta is exactly delta^2 / 2.
    const ProblemInstance single = make_quadratic_equality_instance(1, {scalar(0)}, scalar(0));
    const ReferenceSolution sref = solve_centralized(single, 1e-10);
    for (double delta : {0.1, 0.5, 1.0}) {
      std::vector<DualPoint> zeta{{sref.u_star + scalar(delta), Eigen::VectorXd(0)}};
      CHECK(dual_gap(single, sref, zeta, inner) ==
            doctest::Approx(0.5 * delta * delta).epsilon(1e-6));
    }
  }
}

TEST_CASE("method of multipliers solves a constrained quadratic directly") {
  const std::vector<Eigen::VectorXd> centers{scalar(1), scalar(2), scalar(3)};
  const ProblemInstance inst = make_quadratic_equality_instance(3, centers, scalar(9));
  const AgentProblem stacked = stack_agents(inst);
  MomOptions options;
  options.rho = 10.0;
  options.tol = 1e-10;
  options.inner.tol = 1e-11;
  options.inner.max_iter = 100000;
  const MomResult res = method_of_multipliers(stacked, options);
  CHECK(res.converged);
  const Eigen::VectorXd expected = quadratic_equality_optimum(centers, scalar(9));
  CHECK((res.x - expected).norm() <= 1e-8);
}
