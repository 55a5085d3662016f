#include "dco/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "dco/errors.hpp"
#include "json_eigen.hpp"

namespace dco {
namespace {

void check_block_dims(const ProblemInstance& instance, const Eigen::VectorXd& x,
                      const char* who) {
  if (x.size() != instance.total_dim())
    throw std::invalid_argument(std::string(who) + ": stacked vector has dimension " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(instance.total_dim()));
}

}  // namespace

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
  return v.unaryExpr([t](double a) {
    if (a > t) return a - t;
    if (a < -t) return a + t;
    return 0.0;
  });
}

ProxObjective zero_prox() {
  ProxObjective p;
  p.value = [](const Eigen::VectorXd&) { return 0.0; };
  p.prox = [](const Eigen::VectorXd& v, double) { return v; };
  return p;
}

ProxObjective l1_prox(double weight) {
  if (weight < 0.0) throw std::invalid_argument("l1_prox: negative weight");
  if (weight == 0.0) return zero_prox();
  ProxObjective p;
  p.value = [weight](const Eigen::VectorXd& x) { return weight * x.lpNorm<1>(); };
  p.prox = [weight](const Eigen::VectorXd& v, double t) { return soft_threshold(v, weight * t); };
  return p;
}

double operator_norm(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  const Eigen::MatrixXd gram =
      m.rows() <= m.cols() ? Eigen::MatrixXd(m * m.transpose()) : Eigen::MatrixXd(m.transpose() * m);
  const Eigen::Index n = gram.rows();

  // Deterministic pseudo-random start so we do not sit in an invariant subspace.
  Eigen::VectorXd v(n);
  std::uint64_t s = 0x2545f4914f6cdd1dull;
  for (Eigen::Index i = 0; i < n; ++i) {
    s = s * 6364136223846793005ull + 1442695040888963407ull;
    v(i) = 0.5 + static_cast<double>(s >> 40) / static_cast<double>(1ull << 25);
  }
  v.normalize();

  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const double next = v.dot(gram * v);
    if (std::abs(next - lambda) <= 1e-10 * std::max(1.0, std::abs(next))) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

double AgentProblem::objective_value(const Eigen::VectorXd& x) const {
  return smooth.value(x) + prox.value(x);
}

double AgentProblem::operator_norm_A() const {
  return a_norm >= 0.0 ? a_norm : operator_norm(A);
}

AgentProblem make_quadratic_agent(const AgentData& data, double strong_convexity,
                                  double operating_radius) {
  const int d = static_cast<int>(data.Q.rows());
  if (data.Q.cols() != d || data.r.size() != d)
    throw std::invalid_argument("make_quadratic_agent: inconsistent quadratic dimensions");
  if (data.A.cols() != d || data.A.rows() != data.b.size())
    throw std::invalid_argument("make_quadratic_agent: inconsistent coupling dimensions");

  AgentProblem agent;
  agent.dim = d;
  const Eigen::MatrixXd Q = data.Q;
  const Eigen::VectorXd r = data.r;
  const double offset = data.value_offset;
  agent.smooth.value = [Q, r, offset](const Eigen::VectorXd& x) {
    return 0.5 * x.dot(Q * x) + r.dot(x) + offset;
  };
  agent.smooth.gradient = [Q, r](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return Q * x + r;
  };
  agent.smooth.strong_convexity = strong_convexity;
  agent.smooth.gradient_lipschitz = operator_norm(Q);
  agent.prox = l1_prox(data.l1_weight);
  agent.A = data.A;
  agent.b = data.b;
  agent.a_norm = operator_norm(data.A);

  if (data.radii.size() > 0) {
    if (data.center.size() != d)
      throw std::invalid_argument("make_quadratic_agent: inequality center dimension mismatch");
    const Eigen::VectorXd center = data.center;
    const Eigen::VectorXd radii = data.radii;
    agent.inequality.dim = static_cast<int>(radii.size());
    agent.inequality.value = [center, radii](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      const double s = (x - center).squaredNorm();
      Eigen::VectorXd g(radii.size());
      for (Eigen::Index l = 0; l < radii.size(); ++l) g(l) = s - radii(l) * radii(l);
      return g;
    };
    agent.inequality.jacobian = [center, radii](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
      Eigen::MatrixXd jac(radii.size(), x.size());
      const Eigen::RowVectorXd row = 2.0 * (x - center).transpose();
      for (Eigen::Index l = 0; l < radii.size(); ++l) jac.row(l) = row;
      return jac;
    };
    agent.inequality.differentiable = true;
    agent.inequality.curvature_bound = 2.0;
    agent.inequality.subgradient_bound = 2.0 * (operating_radius + center.norm());
  }
  return agent;
}

ProblemInstance::ProblemInstance(InstanceData data) : data_(std::move(data)) {
  agents_.reserve(data_.agents.size());
  offsets_.reserve(data_.agents.size());
  for (const AgentData& ad : data_.agents) {
    if (ad.A.rows() != data_.p)
      throw std::invalid_argument("ProblemInstance: agent coupling rows != p");
    if (static_cast<int>(ad.radii.size()) != data_.q && !(ad.radii.size() == 0 && data_.q == 0))
      throw std::invalid_argument("ProblemInstance: agent inequality components != q");
    offsets_.push_back(total_dim_);
    total_dim_ += static_cast<int>(ad.Q.rows());
    agents_.push_back(make_quadratic_agent(ad, data_.mu, data_.operating_radius));
  }
  if (data_.slater_point.size() > 0 && data_.slater_point.size() != total_dim_)
    throw std::invalid_argument("ProblemInstance: Slater point has wrong dimension");
}

const AgentProblem& ProblemInstance::agent(int i) const {
  if (i < 0 || i >= n_agents())
    throw std::invalid_argument("ProblemInstance::agent: unknown agent id");
  return agents_[static_cast<std::size_t>(i)];
}

double ProblemInstance::mu() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& a : agents_) m = std::min(m, a.smooth.strong_convexity);
  return agents_.empty() ? 0.0 : m;
}

double ProblemInstance::subgradient_bound() const {
  double bound = 0.0;
  for (const auto& a : agents_)
    if (a.inequality.dim > 0) bound = std::max(bound, a.inequality.subgradient_bound);
  return bound;
}

std::optional<Eigen::VectorXd> ProblemInstance::slater_point() const {
  if (data_.slater_point.size() == 0) return std::nullopt;
  return data_.slater_point;
}

Eigen::VectorXd ProblemInstance::block(const Eigen::VectorXd& stacked, int i) const {
  check_block_dims(*this, stacked, "ProblemInstance::block");
  return stacked.segment(offsets_[static_cast<std::size_t>(i)], agents_[static_cast<std::size_t>(i)].dim);
}

ProblemInstance make_benchmark_instance(int n_agents, int p, int q, std::uint64_t seed, double mu,
                                    double operating_radius) {
  if (n_agents < 1) throw std::invalid_argument("make_benchmark_instance: n_agents must be >= 1");
  if (p < 0 || q < 0) throw std::invalid_argument("make_benchmark_instance: negative coupling dims");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> dim_dist(1, 5);
  std::uniform_real_distribution<double> radius_dist(1.0, 2.0);

  InstanceData data;
  data.family = "benchmark";
  data.seed = seed;
  data.p = p;
  data.q = q;
  data.mu = mu;
  data.operating_radius = operating_radius;

  std::vector<Eigen::VectorXd> centers;
  for (int i = 0; i < n_agents; ++i) {
    const int d = dim_dist(rng);
    AgentData ad;
    Eigen::MatrixXd m(d, d);
    for (int a = 0; a < d; ++a)
      for (int c = 0; c < d; ++c) m(a, c) = normal(rng);
    ad.Q = m.transpose() * m + mu * Eigen::MatrixXd::Identity(d, d);
    ad.r = Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return normal(rng); });
    ad.A = Eigen::MatrixXd::NullaryExpr(p, d, [&](Eigen::Index, Eigen::Index) { return normal(rng); });
    ad.l1_weight = 1.0;
    // Centers sit well inside the operating ball, which keeps the certified
    // subgradient bound (and with it the dual smoothness constant) small.
    ad.center = 0.2 * Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return normal(rng); });
    // b_i = A_i * center_i makes the stacked centers feasible for the
    // equality; radii > 0 make the inequality strict there (Slater point).
    ad.b = ad.A * ad.center;
    if (q > 0)
      ad.radii = Eigen::VectorXd::NullaryExpr(q, [&](Eigen::Index) { return radius_dist(rng); });
    centers.push_back(ad.center);
    data.agents.push_back(std::move(ad));
  }

  int total = 0;
  for (const auto& c : centers) total += static_cast<int>(c.size());
  data.slater_point.resize(total);
  int at = 0;
  for (const auto& c : centers) {
    data.slater_point.segment(at, c.size()) = c;
    at += static_cast<int>(c.size());
  }
  return ProblemInstance(std::move(data));
}

ProblemInstance make_quadratic_equality_instance(int n_agents,
                                                 const std::vector<Eigen::VectorXd>& centers,
                                                 const Eigen::VectorXd& b) {
  if (n_agents < 1 || static_cast<int>(centers.size()) != n_agents)
    throw std::invalid_argument("make_quadratic_equality_instance: need one center per agent");
  const int d = static_cast<int>(centers.front().size());
  for (const auto& c : centers)
    if (c.size() != d)
      throw std::invalid_argument("make_quadratic_equality_instance: centers must share a dimension");
  if (b.size() != d)
    throw std::invalid_argument("make_quadratic_equality_instance: b dimension mismatch");

  InstanceData data;
  data.family = "quadratic_equality";
  data.p = d;
  data.q = 0;
  data.mu = 1.0;

  for (int i = 0; i < n_agents; ++i) {
    AgentData ad;
    ad.Q = Eigen::MatrixXd::Identity(d, d);
    ad.r = -centers[static_cast<std::size_t>(i)];
    ad.value_offset = 0.5 * centers[static_cast<std::size_t>(i)].squaredNorm();
    ad.A = Eigen::MatrixXd::Identity(d, d);
    ad.b = b / static_cast<double>(n_agents);
    data.agents.push_back(std::move(ad));
  }
  return ProblemInstance(std::move(data));
}

ProblemInstance make_random_quadratic_instance(int n_agents, int p, std::uint64_t seed) {
  if (n_agents < 1) throw std::invalid_argument("make_random_quadratic_instance: n_agents >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> dim_dist(1, 4);

  InstanceData data;
  data.family = "random_quadratic";
  data.seed = seed;
  data.p = p;
  data.q = 0;
  data.mu = 1.0;

  for (int i = 0; i < n_agents; ++i) {
    const int d = dim_dist(rng);
    AgentData ad;
    Eigen::MatrixXd m(d, d);
    for (int a = 0; a < d; ++a)
      for (int c = 0; c < d; ++c) m(a, c) = normal(rng);
    ad.Q = m.transpose() * m + Eigen::MatrixXd::Identity(d, d);
    ad.r = Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return normal(rng); });
    ad.A = Eigen::MatrixXd::NullaryExpr(p, d, [&](Eigen::Index, Eigen::Index) { return normal(rng); });
    ad.b = Eigen::VectorXd::NullaryExpr(p, [&](Eigen::Index) { return normal(rng); });
    data.agents.push_back(std::move(ad));
  }
  return ProblemInstance(std::move(data));
}

double agent_dual_lipschitz(const ProblemInstance& instance, int i) {
  const double mu = instance.mu();
  if (!(mu > 0.0)) throw std::invalid_argument("agent_dual_lipschitz: requires mu > 0");
  const double lg = instance.subgradient_bound();
  const double an = instance.agent(i).operator_norm_A();
  return (an * an + instance.q() * lg * lg) / mu;
}

double smoothness_constant(const ProblemInstance& instance) {
  double l = 0.0;
  for (int i = 0; i < instance.n_agents(); ++i) l = std::max(l, agent_dual_lipschitz(instance, i));
  return l;
}

double evaluate_objective(const ProblemInstance& instance, const Eigen::VectorXd& x) {
  check_block_dims(instance, x, "evaluate_objective");
  double total = 0.0;
  for (int i = 0; i < instance.n_agents(); ++i)
    total += instance.agent(i).objective_value(
        x.segment(instance.offsets()[static_cast<std::size_t>(i)], instance.agent(i).dim));
  return total;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> coupling_residuals(const ProblemInstance& instance,
                                                               const Eigen::VectorXd& x) {
  check_block_dims(instance, x, "coupling_residuals");
  Eigen::VectorXd eq = Eigen::VectorXd::Zero(instance.p());
  Eigen::VectorXd ineq = Eigen::VectorXd::Zero(instance.q());
  for (int i = 0; i < instance.n_agents(); ++i) {
    const AgentProblem& agent = instance.agent(i);
    const Eigen::VectorXd xi =
        x.segment(instance.offsets()[static_cast<std::size_t>(i)], agent.dim);
    eq += agent.A * xi - agent.b;
    if (agent.inequality.dim > 0) ineq += agent.inequality.value(xi);
  }
  return {std::move(eq), std::move(ineq)};
}

AgentProblem stack_agents(const ProblemInstance& instance) {
  const int total = instance.total_dim();
  const int p = instance.p();
  const int q = instance.q();
  const auto agents = instance.agents();     // copied into the closures
  const auto offsets = instance.offsets();

  AgentProblem stacked;
  stacked.dim = total;
  stacked.A.resize(p, total);
  stacked.b = Eigen::VectorXd::Zero(p);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    stacked.A.middleCols(offsets[i], agents[i].dim) = agents[i].A;
    stacked.b += agents[i].b;
  }
  stacked.a_norm = operator_norm(stacked.A);

  stacked.smooth.value = [agents, offsets](const Eigen::VectorXd& x) {
    double v = 0.0;
    for (std::size_t i = 0; i < agents.size(); ++i)
      v += agents[i].smooth.value(x.segment(offsets[i], agents[i].dim));
    return v;
  };
  stacked.smooth.gradient = [agents, offsets, total](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(total);
    for (std::size_t i = 0; i < agents.size(); ++i)
      g.segment(offsets[i], agents[i].dim) =
          agents[i].smooth.gradient(x.segment(offsets[i], agents[i].dim));
    return g;
  };
  double mu = std::numeric_limits<double>::infinity();
  double lip = 0.0;
  for (const auto& a : agents) {
    mu = std::min(mu, a.smooth.strong_convexity);
    lip = std::max(lip, a.smooth.gradient_lipschitz);
  }
  stacked.smooth.strong_convexity = agents.empty() ? 0.0 : mu;
  stacked.smooth.gradient_lipschitz = lip;

  stacked.prox.value = [agents, offsets](const Eigen::VectorXd& x) {
    double v = 0.0;
    for (std::size_t i = 0; i < agents.size(); ++i)
      v += agents[i].prox.value(x.segment(offsets[i], agents[i].dim));
    return v;
  };
  stacked.prox.prox = [agents, offsets, total](const Eigen::VectorXd& v, double t) {
    Eigen::VectorXd out(total);
    for (std::size_t i = 0; i < agents.size(); ++i)
      out.segment(offsets[i], agents[i].dim) =
          agents[i].prox.prox(v.segment(offsets[i], agents[i].dim), t);
    return out;
  };

  if (q > 0) {
    stacked.inequality.dim = q;
    stacked.inequality.value = [agents, offsets, q](const Eigen::VectorXd& x) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(q);
      for (std::size_t i = 0; i < agents.size(); ++i)
        if (agents[i].inequality.dim > 0)
          g += agents[i].inequality.value(x.segment(offsets[i], agents[i].dim));
      return g;
    };
    stacked.inequality.jacobian = [agents, offsets, q, total](const Eigen::VectorXd& x) {
      Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(q, total);
      for (std::size_t i = 0; i < agents.size(); ++i)
        if (agents[i].inequality.dim > 0)
          jac.middleCols(offsets[i], agents[i].dim) =
              agents[i].inequality.jacobian(x.segment(offsets[i], agents[i].dim));
      return jac;
    };
    bool differentiable = true;
    double curvature = 0.0;
    double bound_sq = 0.0;
    for (const auto& a : agents) {
      if (a.inequality.dim == 0) continue;
      differentiable = differentiable && a.inequality.differentiable;
      curvature = std::max(curvature, a.inequality.curvature_bound);
      bound_sq += a.inequality.subgradient_bound * a.inequality.subgradient_bound;
    }
    stacked.inequality.differentiable = differentiable;
    stacked.inequality.curvature_bound = curvature;
    stacked.inequality.subgradient_bound = std::sqrt(bound_sq);
  }
  return stacked;
}

void save_instance(const ProblemInstance& instance, const std::string& path) {
  const InstanceData& d = instance.data();
  nlohmann::json j;
  j["format"] = "dco-instance";
  j["version"] = 1;
  j["family"] = d.family;
  j["seed"] = d.seed;
  j["p"] = d.p;
  j["q"] = d.q;
  j["mu"] = d.mu;
  j["operating_radius"] = d.operating_radius;
  nlohmann::json agents = nlohmann::json::array();
  for (const AgentData& ad : d.agents) {
    nlohmann::json a;
    a["dim"] = ad.Q.rows();
    a["Q"] = to_json(ad.Q);
    a["r"] = to_json(ad.r);
    a["value_offset"] = ad.value_offset;
    a["A"] = to_json(ad.A);
    a["b"] = to_json(ad.b);
    a["l1_weight"] = ad.l1_weight;
    if (ad.radii.size() > 0) {
      a["center"] = to_json(ad.center);
      a["radii"] = to_json(ad.radii);
    }
    agents.push_back(std::move(a));
  }
  j["agents"] = std::move(agents);
  if (d.slater_point.size() > 0) j["slater_point"] = to_json(d.slater_point);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_instance: cannot open " + path);
  out << j.dump(1) << '\n';
}

ProblemInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_instance: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("load_instance: " + path + ": " + e.what());
  }
  if (j.value("format", "") != "dco-instance")
    throw ConfigError("load_instance: " + path + ": not a dco-instance file");

  InstanceData d;
  d.family = j.value("family", "unknown");
  d.seed = j.value("seed", 0ull);
  d.p = j.at("p").get<int>();
  d.q = j.at("q").get<int>();
  d.mu = j.at("mu").get<double>();
  d.operating_radius = j.value("operating_radius", kDefaultOperatingRadius);
  for (const auto& a : j.at("agents")) {
    AgentData ad;
    const auto dim = a.at("dim").get<Eigen::Index>();
    ad.Q = matrix_from_json(a.at("Q"), dim);
    ad.r = vector_from_json(a.at("r"));
    ad.value_offset = a.value("value_offset", 0.0);
    ad.A = matrix_from_json(a.at("A"), dim);
    ad.b = vector_from_json(a.at("b"));
    ad.l1_weight = a.value("l1_weight", 0.0);
    if (a.contains("radii")) {
      ad.center = vector_from_json(a.at("center"));
      ad.radii = vector_from_json(a.at("radii"));
    }
    d.agents.push_back(std::move(ad));
  }
  if (j.contains("slater_point")) d.slater_point = vector_from_json(j.at("slater_point"));
  return ProblemInstance(std::move(d));
}

}  // namespace dco
