#include "dco/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "dco/errors.hpp"
#include "dco/parallel.hpp"
#include "format_util.hpp"
#include "json_eigen.hpp"

namespace dco {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

bool is_dual_kind(PayloadKind kind) {
  return kind == PayloadKind::dual_equality || kind == PayloadKind::dual_inequality;
}

}  // namespace

const char* payload_kind_name(PayloadKind kind) {
  switch (kind) {
    case PayloadKind::dual_equality: return "dual_equality";
    case PayloadKind::dual_inequality: return "dual_inequality";
    case PayloadKind::primal: return "primal";
    case PayloadKind::allocation: return "allocation";
  }
  return "unknown";
}

void MessageAudit::begin_round(long round, const Digraph& graph) {
  current_round_ = round;
  current_graph_ = &graph;
  ++rounds_logged_;
}

void MessageAudit::record(long round, int from, int to, PayloadKind kind, long scalars) {
  ++counts_[{from, to, kind}];
  ++total_messages_;
  total_scalars_ += scalars;
  if (!is_dual_kind(kind)) {
    violations_.push_back({round, from, to, kind,
                           std::string("non-dual payload kind '") + payload_kind_name(kind) + "'"});
    return;
  }
  if (!current_graph_ || round != current_round_ || !current_graph_->has_edge(from, to))
    violations_.push_back({round, from, to, kind, "edge is not in the round's graph"});
}

void MessageAudit::log_mixing_edge(int from, int to, int eq_dim, int ineq_dim) {
  if (eq_dim > 0) record(current_round_, from, to, PayloadKind::dual_equality, eq_dim);
  if (ineq_dim > 0) record(current_round_, from, to, PayloadKind::dual_inequality, ineq_dim);
}

void MessageAudit::log(const Message& message) {
  record(message.round, message.from, message.to, message.kind, message.payload.size());
}

AuditReport audit_messages(const RunTrace& trace) {
  AuditReport report;
  report.violations = trace.audit.violations();
  report.total_messages = trace.audit.total_messages();
  report.total_scalars = trace.audit.total_scalars();
  report.pass = report.violations.empty();
  return report;
}

RunTrace run(const ProblemInstance& instance, const GraphSequence& graphs,
             const RunParams& params, const InnerSolveParams& inner,
             const ReferenceSolution* reference, const RunOptions& options) {
  const int n = instance.n_agents();
  if (graphs.n_agents() != n)
    throw std::invalid_argument("run: instance and graph sequence disagree on the agent count");
  if (!(params.rho > 0.0) || !(params.gamma > 0.0) || params.rounds < 0)
    throw std::invalid_argument("run: params require rho > 0, gamma > 0, rounds >= 0");

  const auto t_start = std::chrono::steady_clock::now();
  RunTrace trace;
  trace.params = params;
  trace.inner = inner;
  trace.smoothness = smoothness_constant(instance);

  if (params.rho >= 0.5 / trace.smoothness)
    trace.warnings.push_back("rho=" + std::to_string(params.rho) +
                             " violates rho < 1/(2L) with L=" + std::to_string(trace.smoothness));
  if (std::abs(params.gamma * params.rho - 1.0) > 1e-12)
    trace.warnings.push_back("gamma=" + std::to_string(params.gamma) +
                             " is not 1/rho; the convergence guarantee assumes gamma = 1/rho");

  // Initial states: v = z = 0, duals default to zero, x per options.
  std::vector<AgentState> states;
  states.reserve(static_cast<std::size_t>(n));
  std::mt19937_64 x0_rng(splitmix64(options.seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const AgentProblem& agent = instance.agent(i);
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(agent.dim);
    if (options.initial_x == "random")
      x0 = Eigen::VectorXd::NullaryExpr(agent.dim, [&](Eigen::Index) { return normal(x0_rng); });
    else if (options.initial_x != "zeros")
      throw std::invalid_argument("run: initial_x must be 'zeros' or 'random'");
    const Eigen::VectorXd* u0 =
        options.initial_u.size() == static_cast<std::size_t>(n) ? &options.initial_u[i] : nullptr;
    const Eigen::VectorXd* y0 =
        options.initial_y.size() == static_cast<std::size_t>(n) ? &options.initial_y[i] : nullptr;
    states.push_back(make_initial_state(agent, &x0, u0, y0));
  }

  // phi_i(zeta*) is fixed across the run; evaluate once for the gap samples.
  std::vector<double> phi_star;
  if (reference) {
    std::vector<DualPoint> star(static_cast<std::size_t>(n), reference->zeta_star());
    std::vector<Eigen::VectorXd> warm;
    for (int i = 0; i < n; ++i) warm.push_back(instance.block(reference->x_star, i));
    phi_star = per_agent_dual_values(instance, *reference, star, inner, &warm);
  }

  std::vector<Eigen::VectorXd> u_accum(static_cast<std::size_t>(n)),
      y_accum(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    u_accum[static_cast<std::size_t>(i)] = Eigen::VectorXd::Zero(instance.p());
    y_accum[static_cast<std::size_t>(i)] = Eigen::VectorXd::Zero(instance.q());
  }
  long accum_rounds = 0;

  ThreadPool pool(ThreadPool::resolve_threads(options.threads));

  const auto should_record = [&](long k) {
    if (k <= options.record_every_after) return true;
    if (k == params.rounds) return true;
    return options.record_stride > 0 && k % options.record_stride == 0;
  };

  long recorded = 0;
  bool ball_warned = false;
  long ball_exits = 0;

  const auto sample_dual_gap = [&](RoundMetrics& m, long k) {
    if (!reference) return;
    if (options.dual_gap_stride <= 0) return;
    if (recorded % options.dual_gap_stride != 0 && k != params.rounds) return;
    std::vector<DualPoint> zetas;
    std::vector<Eigen::VectorXd> warm;
    for (int i = 0; i < n; ++i) {
      zetas.push_back({states[static_cast<std::size_t>(i)].u, states[static_cast<std::size_t>(i)].y});
      warm.push_back(states[static_cast<std::size_t>(i)].x);
    }
    const std::vector<double> phi = per_agent_dual_values(instance, *reference, zetas, inner, &warm);
    double gap = 0.0;
    for (int i = 0; i < n; ++i) gap += phi_star[static_cast<std::size_t>(i)] - phi[static_cast<std::size_t>(i)];
    DualGapSample sample;
    sample.round = k;
    sample.gap = clamp_dual_gap(gap, inner.tol);
    m.dual_gap = sample.gap;
    if (accum_rounds > 0) {
      std::vector<DualPoint> avg;
      for (int i = 0; i < n; ++i)
        avg.push_back({u_accum[static_cast<std::size_t>(i)] / static_cast<double>(accum_rounds),
                       y_accum[static_cast<std::size_t>(i)] / static_cast<double>(accum_rounds)});
      const std::vector<double> phi_avg =
          per_agent_dual_values(instance, *reference, avg, inner, &warm);
      double avg_gap = 0.0;
      for (int i = 0; i < n; ++i)
        avg_gap += phi_star[static_cast<std::size_t>(i)] - phi_avg[static_cast<std::size_t>(i)];
      sample.gap_running_average = clamp_dual_gap(avg_gap, inner.tol);
      m.dual_gap_avg = sample.gap_running_average;
    }
    trace.dual_gaps.push_back(std::move(sample));
  };

  const auto record_round = [&](long k) {
    RoundMetrics m = compute_round_metrics(states, instance, reference, k);
    sample_dual_gap(m, k);
    trace.metrics.push_back(std::move(m));
    ++recorded;
  };

  record_round(0);

  for (long k = 0; k < params.rounds; ++k) {
    // zeta^k joins the running average before the round updates it.
    for (int i = 0; i < n; ++i) {
      u_accum[static_cast<std::size_t>(i)] += states[static_cast<std::size_t>(i)].u;
      y_accum[static_cast<std::size_t>(i)] += states[static_cast<std::size_t>(i)].y;
    }
    ++accum_rounds;

    // Phase 1: local primal/dual updates, independent per agent.
    try {
      pool.parallel_for(0, n, [&](int i) {
        try {
          local_update(states[static_cast<std::size_t>(i)], instance.agent(i), params.rho, inner);
        } catch (const SolverFailure& failure) {
          throw SolverFailure(failure.what(), k, i);
        }
      });
    } catch (const SolverFailure& failure) {
      trace.failure = FailureRecord{failure.round, failure.agent, failure.what()};
      break;
    }

    // Phase 2: one dual exchange over graph k+1.
    const GraphSequence::Round round = graphs.round(k + 1);
    trace.audit.begin_round(k + 1, round.graph);
    for (int i = 0; i < n; ++i)
      for (int j : in_neighbors(round.graph, i))
        trace.audit.log_mixing_edge(j, i, instance.p(), instance.q());
    if (options.hooks.extra_messages) options.hooks.extra_messages(k + 1, trace.audit);

    std::vector<Eigen::VectorXd> all_u, all_y;
    all_u.reserve(static_cast<std::size_t>(n));
    all_y.reserve(static_cast<std::size_t>(n));
    for (const AgentState& st : states) {
      all_u.push_back(st.u);
      all_y.push_back(st.y);
    }
    for (int i = 0; i < n; ++i) {
      MixResult mixed = mix_duals_detailed(all_u, all_y, round.weights, i);
      AgentState& st = states[static_cast<std::size_t>(i)];
      st.p_mix = std::move(mixed.p);
      st.q_mix = std::move(mixed.q);
      st.pending_realloc_u = std::move(mixed.delta_u);
      st.pending_realloc_y = std::move(mixed.delta_y);
    }

    // Phase 3: allocation updates and the zero-sum tripwire.
    for (AgentState& st : states) allocation_update(st, params.gamma);
    if (options.hooks.post_allocation) options.hooks.post_allocation(k + 1, states);

    Eigen::VectorXd v_sum = Eigen::VectorXd::Zero(instance.p());
    Eigen::VectorXd z_sum = Eigen::VectorXd::Zero(instance.q());
    double v_scale = 0.0, z_scale = 0.0;
    for (const AgentState& st : states) {
      v_sum += st.v;
      z_sum += st.z;
      v_scale = std::max(v_scale, st.v.norm());
      z_scale = std::max(z_scale, st.z.norm());
    }
    const double v_ratio = v_sum.norm() / (1.0 + v_scale);
    const double z_ratio = z_sum.norm() / (1.0 + z_scale);
    trace.worst_zero_sum_v = std::max(trace.worst_zero_sum_v, v_ratio);
    trace.worst_zero_sum_z = std::max(trace.worst_zero_sum_z, z_ratio);
    if (v_ratio > options.zero_sum_hard_cap || z_ratio > options.zero_sum_hard_cap)
      throw InvariantViolation("allocations left the zero-sum space at round " +
                                   std::to_string(k + 1) + " (|sum v|=" + fmt_sci(v_sum.norm()) +
                                   ", |sum z|=" + fmt_sci(z_sum.norm()) + ")",
                               k + 1);

    if (instance.operating_radius() > 0.0) {
      for (const AgentState& st : states)
        if (st.x.norm() > instance.operating_radius()) ++ball_exits;
      if (ball_exits > 0 && !ball_warned) {
        trace.warnings.push_back("iterates left the operating ball (radius " +
                                 std::to_string(instance.operating_radius()) +
                                 ") at round " + std::to_string(k + 1) +
                                 "; the inequality subgradient bound no longer covers them");
        ball_warned = true;
      }
    }

    trace.rounds_completed = k + 1;
    const long done = k + 1;
    if (std::find(options.zeta_checkpoint_rounds.begin(), options.zeta_checkpoint_rounds.end(),
                  done) != options.zeta_checkpoint_rounds.end()) {
      ZetaCheckpoint cp;
      cp.rounds = accum_rounds;
      for (int i = 0; i < n; ++i)
        cp.zeta_bar.push_back(
            {u_accum[static_cast<std::size_t>(i)] / static_cast<double>(accum_rounds),
             y_accum[static_cast<std::size_t>(i)] / static_cast<double>(accum_rounds)});
      trace.zeta_checkpoints.push_back(std::move(cp));
    }

    if (should_record(done)) record_round(done);
  }

  trace.completed = !trace.failure && trace.rounds_completed == params.rounds;
  trace.final_states = std::move(states);
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return trace;
}

void write_trace(const RunTrace& trace, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  write_metrics_csv(trace, (fs::path(directory) / "metrics.csv").string());
  write_primal_errors_csv(trace, (fs::path(directory) / "primal_errors.csv").string());

  {
    std::ofstream out(fs::path(directory) / "messages_audit.csv");
    out << "from,to,kind,count\n";
    for (const auto& [key, count] : trace.audit.counts())
      out << key.from << ',' << key.to << ',' << payload_kind_name(key.kind) << ',' << count
          << '\n';
  }

  nlohmann::json j;
  j["rounds_completed"] = trace.rounds_completed;
  j["completed"] = trace.completed;
  j["wall_seconds"] = trace.wall_seconds;
  j["worst_zero_sum_v"] = trace.worst_zero_sum_v;
  j["worst_zero_sum_z"] = trace.worst_zero_sum_z;
  j["warnings"] = trace.warnings;
  j["rho"] = trace.params.rho;
  j["gamma"] = trace.params.gamma;
  j["smoothness"] = trace.smoothness;
  if (trace.failure) {
    j["failure"] = {{"round", trace.failure->round},
                    {"agent", trace.failure->agent},
                    {"what", trace.failure->what}};
  }
  nlohmann::json agents = nlohmann::json::array();
  for (const AgentState& st : trace.final_states) {
    nlohmann::json a;
    a["x"] = to_json(st.x);
    a["u"] = to_json(st.u);
    a["y"] = to_json(st.y);
    a["p"] = to_json(st.p_mix);
    a["q"] = to_json(st.q_mix);
    a["v"] = to_json(st.v);
    a["z"] = to_json(st.z);
    agents.push_back(std::move(a));
  }
  j["agents"] = std::move(agents);
  nlohmann::json gaps = nlohmann::json::array();
  for (const DualGapSample& s : trace.dual_gaps) {
    nlohmann::json g;
    g["k"] = s.round;
    g["dual_gap"] = s.gap;
    if (s.gap_running_average) g["dual_gap_avg"] = *s.gap_running_average;
    gaps.push_back(std::move(g));
  }
  j["dual_gaps"] = std::move(gaps);
  std::ofstream out(fs::path(directory) / "final_state.json");
  out << j.dump(1) << '\n';
}

}  // namespace dco
