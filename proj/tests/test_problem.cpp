#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <random>

#include "dco/problem.hpp"

using namespace dco;

namespace {

Eigen::VectorXd scalar(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}

// Brute-force prox oracle on a 1-d grid.
double grid_prox_l1(double v, double t, double weight) {
  double best = 0.0, best_val = 1e300;
  for (double u = -4.0; u <= 4.0; u += 1e-4) {
    const double val = weight * std::abs(u) + (u - v) * (u - v) / (2.0 * t);
    if (val < best_val) {
      best_val = val;
      best = u;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("soft threshold matches the grid-search prox definition") {
  const ProxObjective prox = l1_prox(1.0);
  for (double v : {-2.0, -0.7, 0.0, 0.3, 1.9}) {
    for (double t : {0.25, 1.0, 2.0}) {
      const double got = prox.prox(scalar(v), t)(0);
      CHECK(got == doctest::Approx(grid_prox_l1(v, t, 1.0)).epsilon(1e-3));
    }
  }
}

TEST_CASE("benchmark instance has the advertised shape and a Slater certificate") {
  const ProblemInstance inst = make_benchmark_instance(20, 25, 1, 5);
  CHECK(inst.n_agents() == 20);
  CHECK(inst.p() == 25);
  CHECK(inst.q() == 1);
  CHECK(inst.mu() == doctest::Approx(1.0));
  for (const auto& agent : inst.agents()) {
    CHECK(agent.dim >= 1);
    CHECK(agent.dim <= 5);
    CHECK(agent.A.rows() == 25);
  }
  REQUIRE(inst.slater_point().has_value());
  const auto [eq, ineq] = coupling_residuals(inst, *inst.slater_point());
  CHECK(eq.norm() <= 1e-12 * (1.0 + eq.size()));
  // sum_i g_i(center_i) = -sum_i c_i^2 < 0 by construction.
  double radii_sq = 0.0;
  for (const auto& ad : inst.data().agents) radii_sq += ad.radii(0) * ad.radii(0);
  CHECK(ineq(0) == doctest::Approx(-radii_sq).epsilon(1e-12));
  CHECK(ineq(0) < 0.0);
}

TEST_CASE("single-agent benchmark instance degenerates cleanly") {
  const ProblemInstance inst = make_benchmark_instance(1, 1, 1, 3);
  CHECK(inst.n_agents() == 1);
  CHECK(inst.total_dim() == inst.agent(0).dim);
}

TEST_CASE("quadratic equality family closed forms") {
  SUBCASE("three scalar agents") {
    const ProblemInstance inst =
        make_quadratic_equality_instance(3, {scalar(1), scalar(2), scalar(3)}, scalar(9));
    // x_i* = c_i + (b - sum c) / n = c_i + 1.
    const Eigen::VectorXd shift = scalar(1);
    for (int i = 0; i < 3; ++i) {
      const double expected = static_cast<double>(i + 1) + 1.0;
      const AgentProblem& agent = inst.agent(i);
      CHECK(agent.smooth.gradient(scalar(expected))(0) ==
            doctest::Approx(expected - (i + 1)).epsilon(1e-12));
    }
    auto [eq, ineq] = coupling_residuals(inst, (Eigen::VectorXd(3) << 2, 3, 4).finished());
    CHECK(eq.norm() <= 1e-12);
    CHECK(ineq.size() == 0);
  }
  SUBCASE("single agent with feasible minimizer") {
    const ProblemInstance inst = make_quadratic_equality_instance(1, {scalar(5)}, scalar(5));
    auto [eq, ineq] = coupling_residuals(inst, scalar(5));
    CHECK(eq.norm() <= 1e-12);
    CHECK(inst.agent(0).smooth.gradient(scalar(5)).norm() <= 1e-12);
  }
  SUBCASE("symmetric zero case") {
    const ProblemInstance inst =
        make_quadratic_equality_instance(2, {scalar(0), scalar(0)}, scalar(0));
    auto [eq, ineq] = coupling_residuals(inst, Eigen::VectorXd::Zero(2));
    CHECK(eq.norm() == 0.0);
  }
  SUBCASE("dimension mismatch is rejected") {
    CHECK_THROWS_AS(
        make_quadratic_equality_instance(2, {scalar(1), Eigen::VectorXd::Zero(2)}, scalar(0)),
        std::invalid_argument);
  }
}

TEST_CASE("smoothness constant") {
  SUBCASE("hand arithmetic: A=[1], q=1, L_g=1, mu=1 gives L=2") {
    InstanceData data;
    data.p = 1;
    data.q = 1;
    data.mu = 1.0;
    data.operating_radius = 0.5;  // L_g = 2 (R + |center|) = 1 with center 0
    AgentData ad;
    ad.Q = Eigen::MatrixXd::Identity(1, 1);
    ad.r = scalar(0);
    ad.A = Eigen::MatrixXd::Identity(1, 1);
    ad.b = scalar(0);
    ad.center = scalar(0);
    ad.radii = scalar(1);
    data.agents.push_back(ad);
    const ProblemInstance inst{std::move(data)};
    CHECK(inst.subgradient_bound() == doctest::Approx(1.0));
    CHECK(smoothness_constant(inst) == doctest::Approx(2.0));
  }
  SUBCASE("zero coupling gives zero") {
    InstanceData data;
    data.p = 1;
    data.q = 0;
    data.mu = 1.0;
    AgentData ad;
    ad.Q = Eigen::MatrixXd::Identity(2, 2);
    ad.r = Eigen::VectorXd::Zero(2);
    ad.A = Eigen::MatrixXd::Zero(1, 2);
    ad.b = Eigen::VectorXd::Zero(1);
    data.agents.push_back(ad);
    const ProblemInstance inst{std::move(data)};
    CHECK(smoothness_constant(inst) == doctest::Approx(0.0));
  }
  SUBCASE("power iteration matches dense SVD") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(
          3, 2, [&](Eigen::Index, Eigen::Index) { return normal(rng); });
      const double svd = a.jacobiSvd().singularValues()(0);
      CHECK(operator_norm(a) == doctest::Approx(svd).epsilon(1e-8));
    }
  }
}

TEST_CASE("evaluate_objective") {
  const ProblemInstance inst = make_benchmark_instance(4, 3, 1, 11);
  SUBCASE("zero vector hits the value offsets only") {
    CHECK(evaluate_objective(inst, Eigen::VectorXd::Zero(inst.total_dim())) ==
          doctest::Approx(0.0));
  }
  SUBCASE("matches term-by-term recomputation at random points") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal;
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(
        inst.total_dim(), [&](Eigen::Index) { return normal(rng); });
    double manual = 0.0;
    for (int i = 0; i < inst.n_agents(); ++i) {
      const AgentData& ad = inst.data().agents[static_cast<std::size_t>(i)];
      const Eigen::VectorXd xi = inst.block(x, i);
      manual += 0.5 * xi.dot(ad.Q * xi) + ad.r.dot(xi) + xi.lpNorm<1>();
    }
    CHECK(evaluate_objective(inst, x) == doctest::Approx(manual).epsilon(1e-12));
  }
  SUBCASE("dimension mismatch throws") {
    CHECK_THROWS_AS(evaluate_objective(inst, Eigen::VectorXd::Zero(3)), std::invalid_argument);
  }
  SUBCASE("single agent f = x^2/2 at x = 2") {
    const ProblemInstance single =
        make_quadratic_equality_instance(1, {scalar(0)}, scalar(0));
    CHECK(evaluate_objective(single, scalar(2)) == doctest::Approx(2.0));
  }
}

TEST_CASE("coupling residual responds linearly to block perturbations") {
  const ProblemInstance inst = make_benchmark_instance(3, 2, 1, 1);
  REQUIRE(inst.slater_point().has_value());
  Eigen::VectorXd x = *inst.slater_point();
  const auto [eq0, ineq0] = coupling_residuals(inst, x);
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(inst.agent(1).dim);
  delta(0) = 0.37;
  x.segment(inst.offsets()[1], inst.agent(1).dim) += delta;
  const auto [eq1, ineq1] = coupling_residuals(inst, x);
  CHECK((eq1 - eq0 - inst.agent(1).A * delta).norm() <= 1e-12);
}

TEST_CASE("convexity and subgradient properties hold on samples") {
  const ProblemInstance inst = make_benchmark_instance(5, 4, 1, 23);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (int i = 0; i < inst.n_agents(); ++i) {
    const AgentProblem& agent = inst.agent(i);
    const double lg = agent.inequality.subgradient_bound;
    for (int s = 0; s < 30; ++s) {
      const Eigen::VectorXd x =
          Eigen::VectorXd::NullaryExpr(agent.dim, [&](Eigen::Index) { return normal(rng); });
      const Eigen::VectorXd y =
          Eigen::VectorXd::NullaryExpr(agent.dim, [&](Eigen::Index) { return normal(rng); });

      // convexity of each inequality component via its subgradient
      const Eigen::VectorXd gx = agent.inequality.value(x);
      const Eigen::VectorXd gy = agent.inequality.value(y);
      const Eigen::MatrixXd jac = agent.inequality.jacobian(x);
      for (int l = 0; l < agent.inequality.dim; ++l)
        CHECK(gy(l) >= gx(l) + jac.row(l).dot(y - x) - 1e-10);

      // strong convexity of f through a valid subgradient (sign rule for l1)
      const Eigen::VectorXd sub =
          agent.smooth.gradient(x) +
          x.unaryExpr([](double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); });
      CHECK(agent.objective_value(y) >= agent.objective_value(x) + sub.dot(y - x) +
                                            0.5 * inst.mu() * (y - x).squaredNorm() - 1e-10);

      // subgradient bound inside the operating ball
      Eigen::VectorXd inside = x;
      if (inside.norm() > inst.operating_radius())
        inside *= inst.operating_radius() / inside.norm();
      const Eigen::MatrixXd jac_in = agent.inequality.jacobian(inside);
      for (int l = 0; l < agent.inequality.dim; ++l)
        CHECK(jac_in.row(l).norm() <= lg + 1e-12);
    }
  }
}

TEST_CASE("instances round-trip through their file form") {
  const ProblemInstance inst = make_benchmark_instance(4, 3, 1, 77);
  const std::string path = (std::filesystem::temp_directory_path() / "dco_inst.json").string();
  save_instance(inst, path);
  const ProblemInstance loaded = load_instance(path);
  REQUIRE(loaded.n_agents() == inst.n_agents());
  CHECK(loaded.p() == inst.p());
  CHECK(loaded.q() == inst.q());
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  for (int i = 0; i < inst.n_agents(); ++i) {
    CHECK(loaded.data().agents[i].Q == inst.data().agents[i].Q);
    CHECK(loaded.data().agents[i].A == inst.data().agents[i].A);
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(
        inst.agent(i).dim, [&](Eigen::Index) { return normal(rng); });
    CHECK(loaded.agent(i).objective_value(x) == inst.agent(i).objective_value(x));
    CHECK(loaded.agent(i).inequality.value(x) == inst.agent(i).inequality.value(x));
  }
  std::filesystem::remove(path);
}

TEST_CASE("stacked agent reproduces the per-agent pieces") {
  const ProblemInstance inst = make_benchmark_instance(3, 2, 1, 9);
  const AgentProblem stacked = stack_agents(inst);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(
      inst.total_dim(), [&](Eigen::Index) { return normal(rng); });
  CHECK(stacked.objective_value(x) == doctest::Approx(evaluate_objective(inst, x)).epsilon(1e-12));
  const auto [eq, ineq] = coupling_residuals(inst, x);
  CHECK((stacked.A * x - stacked.b - eq).norm() <= 1e-10);
  CHECK((stacked.inequality.value(x) - ineq).norm() <= 1e-10);
}
