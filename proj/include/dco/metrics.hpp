#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dco/agent.hpp"
#include "dco/problem.hpp"
#include "dco/reference.hpp"

namespace dco {

struct RunTrace;  // simulator.hpp

/// Diagnostics for one recorded round. Reference-dependent entries are
/// absent when no reference solution was supplied; the dual-gap entries are
/// only filled on sampled rounds.
struct RoundMetrics {
  long round = 0;
  double eq_feasibility = 0.0;    // max_i ||A_i x_i - b_i - v_i||
  double ineq_feasibility = 0.0;  // max_i max_l [g_il(x_i) - z_il]_+
  double zero_sum_v = 0.0;        // ||sum_i v_i||
  double zero_sum_z = 0.0;        // ||sum_i z_i||
  double dual_consensus = 0.0;    // max_i ||zeta_i - mean zeta||
  double max_stationarity = 0.0;
  std::optional<double> objective_gap;     // |f(x) - f*|
  std::optional<double> primal_error_max;  // max_i ||x_i - x_i*||
  std::optional<double> dual_gap;
  std::optional<double> dual_gap_avg;  // at the running-average duals
  std::vector<double> primal_errors;   // per agent, with a reference
};

RoundMetrics compute_round_metrics(const std::vector<AgentState>& states,
                                   const ProblemInstance& instance,
                                   const ReferenceSolution* reference, long round);

/// Least-squares slope of log(value) against log(k).
double fit_loglog_slope(const std::vector<double>& ks, const std::vector<double>& values);

/// Slope for a named metric column over recorded rounds in [k_lo, k_hi].
/// Throws std::invalid_argument if any value in the window is not positive
/// or fewer than two samples exist.
double fit_rate(const RunTrace& trace, const std::string& metric, long k_lo, long k_hi);

/// metrics.csv: header
/// k,obj_gap,eq_feas,ineq_feas,zerosum_v,zerosum_z,dual_consensus,dual_gap,max_stationarity,primal_err_max
/// one row per recorded round, full round-trip precision, empty cell for
/// absent optionals.
void write_metrics_csv(const RunTrace& trace, const std::string& path);

/// Companion per-agent primal error table: k,agent_0,...,agent_{N-1}.
void write_primal_errors_csv(const RunTrace& trace, const std::string& path);

}  // namespace dco
