#include "dco/metrics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dco/simulator.hpp"
#include "format_util.hpp"

namespace dco {
namespace {

std::optional<double> metric_by_name(const RoundMetrics& m, const std::string& name) {
  if (name == "obj_gap") return m.objective_gap;
  if (name == "eq_feas") return m.eq_feasibility;
  if (name == "ineq_feas") return m.ineq_feasibility;
  if (name == "zerosum_v") return m.zero_sum_v;
  if (name == "zerosum_z") return m.zero_sum_z;
  if (name == "dual_consensus") return m.dual_consensus;
  if (name == "dual_gap") return m.dual_gap;
  if (name == "dual_gap_avg") return m.dual_gap_avg;
  if (name == "max_stationarity") return m.max_stationarity;
  if (name == "primal_err_max") return m.primal_error_max;
  throw std::invalid_argument("fit_rate: unknown metric '" + name + "'");
}

void put(std::ofstream& out, const std::optional<double>& v) {
  if (v) out << fmt_sci(*v);
}

}  // namespace

RoundMetrics compute_round_metrics(const std::vector<AgentState>& states,
                                   const ProblemInstance& instance,
                                   const ReferenceSolution* reference, long round) {
  const int n = instance.n_agents();
  if (static_cast<int>(states.size()) != n)
    throw std::invalid_argument("compute_round_metrics: one state per agent required");

  RoundMetrics m;
  m.round = round;

  Eigen::VectorXd v_sum = Eigen::VectorXd::Zero(instance.p());
  Eigen::VectorXd z_sum = Eigen::VectorXd::Zero(instance.q());
  Eigen::VectorXd u_mean = Eigen::VectorXd::Zero(instance.p());
  Eigen::VectorXd y_mean = Eigen::VectorXd::Zero(instance.q());
  for (const AgentState& st : states) {
    v_sum += st.v;
    z_sum += st.z;
    u_mean += st.u;
    y_mean += st.y;
  }
  u_mean /= static_cast<double>(n);
  y_mean /= static_cast<double>(n);
  m.zero_sum_v = v_sum.norm();
  m.zero_sum_z = z_sum.norm();

  for (int i = 0; i < n; ++i) {
    const AgentProblem& agent = instance.agent(i);
    const AgentState& st = states[static_cast<std::size_t>(i)];
    m.eq_feasibility = std::max(m.eq_feasibility, (agent.A * st.x - agent.b - st.v).norm());
    if (agent.inequality.dim > 0) {
      const Eigen::VectorXd slack = agent.inequality.value(st.x) - st.z;
      m.ineq_feasibility = std::max(m.ineq_feasibility, std::max(0.0, slack.maxCoeff()));
    }
    const double consensus =
        std::sqrt((st.u - u_mean).squaredNorm() + (st.y - y_mean).squaredNorm());
    m.dual_consensus = std::max(m.dual_consensus, consensus);
    m.max_stationarity =
        std::max(m.max_stationarity, stationarity_residual(agent, st.x, st.u, st.y));
  }

  if (reference) {
    Eigen::VectorXd x(instance.total_dim());
    for (int i = 0; i < n; ++i)
      x.segment(instance.offsets()[static_cast<std::size_t>(i)], instance.agent(i).dim) =
          states[static_cast<std::size_t>(i)].x;
    m.objective_gap = std::abs(evaluate_objective(instance, x) - reference->f_star);
    m.primal_errors.resize(static_cast<std::size_t>(n));
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const double err =
          (states[static_cast<std::size_t>(i)].x - instance.block(reference->x_star, i)).norm();
      m.primal_errors[static_cast<std::size_t>(i)] = err;
      worst = std::max(worst, err);
    }
    m.primal_error_max = worst;
  }
  return m;
}

double fit_loglog_slope(const std::vector<double>& ks, const std::vector<double>& values) {
  if (ks.size() != values.size() || ks.size() < 2)
    throw std::invalid_argument("fit_loglog_slope: need at least two samples");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!(ks[i] > 0.0) || !(values[i] > 0.0))
      throw std::invalid_argument("fit_loglog_slope: samples must be positive");
    const double x = std::log(ks[i]);
    const double y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_loglog_slope: degenerate abscissae");
  return (n * sxy - sx * sy) / denom;
}

double fit_rate(const RunTrace& trace, const std::string& metric, long k_lo, long k_hi) {
  std::vector<double> ks, values;
  for (const RoundMetrics& m : trace.metrics) {
    if (m.round < std::max(k_lo, 1L) || m.round > k_hi) continue;
    const std::optional<double> v = metric_by_name(m, metric);
    if (!v) continue;
    if (!(*v > 0.0))
      throw std::invalid_argument("fit_rate: metric '" + metric + "' is not positive at k=" +
                                  std::to_string(m.round));
    ks.push_back(static_cast<double>(m.round));
    values.push_back(*v);
  }
  return fit_loglog_slope(ks, values);
}

void write_metrics_csv(const RunTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path);
  out << "k,obj_gap,eq_feas,ineq_feas,zerosum_v,zerosum_z,dual_consensus,dual_gap,"
         "max_stationarity,primal_err_max\n";
  for (const RoundMetrics& m : trace.metrics) {
    out << m.round << ',';
    put(out, m.objective_gap);
    out << ',' << fmt_sci(m.eq_feasibility) << ',' << fmt_sci(m.ineq_feasibility) << ','
        << fmt_sci(m.zero_sum_v) << ',' << fmt_sci(m.zero_sum_z) << ','
        << fmt_sci(m.dual_consensus) << ',';
    put(out, m.dual_gap);
    out << ',' << fmt_sci(m.max_stationarity) << ',';
    put(out, m.primal_error_max);
    out << '\n';
  }
}

void write_primal_errors_csv(const RunTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_primal_errors_csv: cannot open " + path);
  std::size_t n_agents = 0;
  for (const RoundMetrics& m : trace.metrics) n_agents = std::max(n_agents, m.primal_errors.size());
  out << 'k';
  for (std::size_t i = 0; i < n_agents; ++i) out << ",agent_" << i;
  out << '\n';
  for (const RoundMetrics& m : trace.metrics) {
    if (m.primal_errors.empty()) continue;
    out << m.round;
    for (double e : m.primal_errors) out << ',' << fmt_sci(e);
    out << '\n';
  }
}

}  // namespace dco
