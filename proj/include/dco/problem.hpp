#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dco {

/// Ball that the solver's iterates are expected to live in; the inequality
/// subgradient bound L_g is certified on it. Covers the generated families'
/// optima and transients with margin.
inline constexpr double kDefaultOperatingRadius = 1.1;

/// Differentiable part of an agent objective with declared convexity data.
struct SmoothObjective {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  double strong_convexity = 0.0;
  double gradient_lipschitz = 0.0;
};

/// Closed convex term accessed through its proximal map,
/// prox(v, t) = argmin_u value(u) + ||u - v||^2 / (2 t).
struct ProxObjective {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> prox;
};

ProxObjective zero_prox();
ProxObjective l1_prox(double weight);
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t);

/// Componentwise-convex coupled inequality g : R^d -> R^q.
struct CoupledInequality {
  int dim = 0;  // q
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> value;
  /// Row l is a (sub)gradient of component l.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
  bool differentiable = true;
  /// Upper bound on the curvature of any component, for step seeding.
  double curvature_bound = 0.0;
  /// Bound on component (sub)gradients, valid on the operating ball.
  double subgradient_bound = 0.0;
};

/// One agent's private data: f_i = smooth + prox, coupled rows A_i x - b_i,
/// and the coupled inequality contribution g_i.
struct AgentProblem {
  int dim = 0;
  SmoothObjective smooth;
  ProxObjective prox;            // always callable; zero_prox() when unused
  CoupledInequality inequality;  // dim == 0 when absent
  Eigen::MatrixXd A;             // p x dim
  Eigen::VectorXd b;             // p
  double a_norm = -1.0;          // cached spectral norm of A; < 0 = unknown

  double objective_value(const Eigen::VectorXd& x) const;
  double operator_norm_A() const;
};

/// Raw matrices a generated instance is built from; serializable, so a run
/// is exactly reproducible from its instance file.
struct AgentData {
  Eigen::MatrixXd Q;
  Eigen::VectorXd r;
  double value_offset = 0.0;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double l1_weight = 0.0;
  Eigen::VectorXd center;  // size 0 = no inequality contribution
  Eigen::VectorXd radii;   // one entry per inequality component
};

struct InstanceData {
  std::string family;
  std::uint64_t seed = 0;
  int p = 0;
  int q = 0;
  double mu = 1.0;
  double operating_radius = kDefaultOperatingRadius;
  std::vector<AgentData> agents;
  Eigen::VectorXd slater_point;  // stacked; size 0 = none
};

class ProblemInstance {
 public:
  explicit ProblemInstance(InstanceData data);

  int n_agents() const { return static_cast<int>(agents_.size()); }
  int p() const { return data_.p; }
  int q() const { return data_.q; }
  /// Common strong-convexity modulus: min over agents.
  double mu() const;
  /// Global inequality subgradient bound L_g: max over agents, 0 when q = 0.
  double subgradient_bound() const;
  double operating_radius() const { return data_.operating_radius; }

  const std::vector<AgentProblem>& agents() const { return agents_; }
  const AgentProblem& agent(int i) const;
  const InstanceData& data() const { return data_; }
  std::optional<Eigen::VectorXd> slater_point() const;

  int total_dim() const { return total_dim_; }
  const std::vector<int>& offsets() const { return offsets_; }
  Eigen::VectorXd block(const Eigen::VectorXd& stacked, int i) const;

 private:
  InstanceData data_;
  std::vector<AgentProblem> agents_;
  std::vector<int> offsets_;
  int total_dim_ = 0;
};

/// Quadratic agent: f(x) = x'Qx/2 + r'x + offset + l1_weight * ||x||_1, with
/// optional ball-style inequality components g_l(x) = ||x - center||^2 - radii_l^2.
AgentProblem make_quadratic_agent(const AgentData& data, double strong_convexity,
                                  double operating_radius);

/// Random family used in the reported experiment: f_i as above with
/// Q_i = M'M + mu*I, coupled equalities generated so the stacked centers are
/// feasible, and a single ball inequality that is strict at the centers.
ProblemInstance make_benchmark_instance(int n_agents, int p, int q, std::uint64_t seed,
                                    double mu = 1.0,
                                    double operating_radius = kDefaultOperatingRadius);

/// f_i(x) = ||x - center_i||^2 / 2 with A_i = I and b_i = b / n. The optimum
/// has the closed form x_i* = center_i + (b - sum_j center_j) / n.
ProblemInstance make_quadratic_equality_instance(int n_agents,
                                                 const std::vector<Eigen::VectorXd>& centers,
                                                 const Eigen::VectorXd& b);

/// Random strongly convex quadratics with general equality coupling and no
/// nonsmooth part; exercised against the dense KKT oracle.
ProblemInstance make_random_quadratic_instance(int n_agents, int p, std::uint64_t seed);

/// L = max_i (||A_i||^2 + q L_g^2) / mu, spectral norms by power iteration.
double smoothness_constant(const ProblemInstance& instance);
double agent_dual_lipschitz(const ProblemInstance& instance, int i);

double evaluate_objective(const ProblemInstance& instance, const Eigen::VectorXd& x);

/// (sum_i A_i x_i - b_i, sum_i g_i(x_i)).
std::pair<Eigen::VectorXd, Eigen::VectorXd> coupling_residuals(const ProblemInstance& instance,
                                                               const Eigen::VectorXd& x);

/// Collapses all agents into one problem on the stacked variable; used by the
/// centralized reference solver.
AgentProblem stack_agents(const ProblemInstance& instance);

/// Spectral norm by power iteration: 200 iterations or 1e-10 relative change.
double operator_norm(const Eigen::MatrixXd& m);

void save_instance(const ProblemInstance& instance, const std::string& path);
ProblemInstance load_instance(const std::string& path);

}  // namespace dco
