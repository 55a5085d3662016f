#include "dco/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "dco/errors.hpp"
#include "dco/graph.hpp"
#include "dco/metrics.hpp"
#include "format_util.hpp"
#include "json_eigen.hpp"

namespace fs = std::filesystem;

namespace dco {
namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::string& scope,
                         const std::set<std::string>& known) {
  const std::string where = scope.empty() ? "config" : "config." + scope;
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw ConfigError(where + ": unknown field '" + key + "'");
}

template <typename T>
T get_field(const json& j, const std::string& scope, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config." + scope + "." + key + ": wrong type");
  }
}

std::optional<double> get_auto_or_number(const json& j, const std::string& scope,
                                         const std::string& key) {
  if (!j.contains(key)) return std::nullopt;
  const json& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "auto") return std::nullopt;
    throw ConfigError("config." + scope + "." + key + ": expected a number or \"auto\"");
  }
  if (!v.is_number()) throw ConfigError("config." + scope + "." + key + ": expected a number");
  const double value = v.get<double>();
  if (!(value > 0.0)) throw ConfigError("config." + scope + "." + key + ": must be positive");
  return value;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(origin + ": config root must be an object");
  reject_unknown_keys(j, "", {"instance", "graph", "run", "inner", "reference", "output",
                              "initial_x", "threads", "resolved"});

  ExperimentConfig cfg;
  if (j.contains("instance")) {
    const json& ji = j.at("instance");
    reject_unknown_keys(ji, "instance",
                        {"generator", "file", "n_agents", "p", "q", "dim", "seed", "mu",
                         "operating_radius", "centers", "b"});
    cfg.instance.generator = get_field<std::string>(ji, "instance", "generator", "benchmark");
    cfg.instance.file = get_field<std::string>(ji, "instance", "file", "");
    cfg.instance.n_agents = get_field<int>(ji, "instance", "n_agents", 20);
    cfg.instance.p = get_field<int>(ji, "instance", "p", 25);
    cfg.instance.q = get_field<int>(ji, "instance", "q", 1);
    cfg.instance.dim = get_field<int>(ji, "instance", "dim", 1);
    cfg.instance.seed = get_field<std::uint64_t>(ji, "instance", "seed", 1);
    cfg.instance.mu = get_field<double>(ji, "instance", "mu", 1.0);
    cfg.instance.operating_radius =
        get_field<double>(ji, "instance", "operating_radius", kDefaultOperatingRadius);
    if (ji.contains("centers"))
      for (const auto& c : ji.at("centers")) cfg.instance.centers.push_back(vector_from_json(c));
    if (ji.contains("b")) cfg.instance.coupling_b = vector_from_json(ji.at("b"));
    if (cfg.instance.n_agents < 1)
      throw ConfigError("config.instance.n_agents: must be >= 1");
    const std::set<std::string> generators{"benchmark", "quadratic_equality", "random_quadratic"};
    if (cfg.instance.file.empty() && !generators.count(cfg.instance.generator))
      throw ConfigError("config.instance.generator: unknown generator '" +
                        cfg.instance.generator + "'");
  }
  if (j.contains("graph")) {
    const json& jg = j.at("graph");
    reject_unknown_keys(jg, "graph", {"n_cycles", "seed", "export_edges"});
    cfg.graph.n_cycles = get_field<int>(jg, "graph", "n_cycles", 2);
    cfg.graph.seed = get_field<std::uint64_t>(jg, "graph", "seed", 7);
    cfg.graph.export_edges = get_field<bool>(jg, "graph", "export_edges", false);
    if (cfg.graph.n_cycles < 1) throw ConfigError("config.graph.n_cycles: must be >= 1");
  }
  if (j.contains("run")) {
    const json& jr = j.at("run");
    reject_unknown_keys(jr, "run", {"rho", "gamma", "rounds"});
    cfg.run.rho = get_auto_or_number(jr, "run", "rho");
    cfg.run.gamma = get_auto_or_number(jr, "run", "gamma");
    cfg.run.rounds = get_field<long>(jr, "run", "rounds", 10000);
    if (cfg.run.rounds < 0) throw ConfigError("config.run.rounds: must be >= 0");
  }
  if (j.contains("inner")) {
    const json& jn = j.at("inner");
    reject_unknown_keys(jn, "inner", {"tol", "max_iter", "allow_subgradient_fallback"});
    cfg.inner.tol = get_field<double>(jn, "inner", "tol", 1e-9);
    cfg.inner.max_iter = get_field<int>(jn, "inner", "max_iter", 5000);
    cfg.inner.allow_subgradient_fallback =
        get_field<bool>(jn, "inner", "allow_subgradient_fallback", false);
    if (!(cfg.inner.tol > 0.0)) throw ConfigError("config.inner.tol: must be positive");
    if (cfg.inner.max_iter < 1) throw ConfigError("config.inner.max_iter: must be >= 1");
  }
  if (j.contains("reference")) {
    const json& jf = j.at("reference");
    reject_unknown_keys(jf, "reference", {"mode", "file", "tol"});
    cfg.reference.mode = get_field<std::string>(jf, "reference", "mode", "solve");
    cfg.reference.file = get_field<std::string>(jf, "reference", "file", "");
    cfg.reference.tol = get_field<double>(jf, "reference", "tol", 1e-10);
    if (cfg.reference.mode != "solve" && cfg.reference.mode != "load" &&
        cfg.reference.mode != "none")
      throw ConfigError("config.reference.mode: expected solve, load, or none");
    if (cfg.reference.mode == "load" && cfg.reference.file.empty())
      throw ConfigError("config.reference.file: required when mode is 'load'");
  }
  if (j.contains("output")) {
    const json& jo = j.at("output");
    reject_unknown_keys(jo, "output",
                        {"dir", "downsample_after", "downsample_stride", "dual_gap_stride",
                         "checkpoints"});
    cfg.output.dir = get_field<std::string>(jo, "output", "dir", "out");
    cfg.output.downsample_after = get_field<long>(jo, "output", "downsample_after", 1000);
    cfg.output.downsample_stride = get_field<long>(jo, "output", "downsample_stride", 10);
    cfg.output.dual_gap_stride = get_field<long>(jo, "output", "dual_gap_stride", 10);
    if (jo.contains("checkpoints"))
      for (const auto& c : jo.at("checkpoints")) cfg.output.checkpoints.push_back(c.get<long>());
  }
  cfg.initial_x = get_field<std::string>(j, "", "initial_x", "zeros");
  if (cfg.initial_x != "zeros" && cfg.initial_x != "random")
    throw ConfigError("config.initial_x: expected 'zeros' or 'random'");
  cfg.threads = get_field<int>(j, "", "threads", 1);
  if (cfg.threads < 0) throw ConfigError("config.threads: must be >= 0");
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

ProblemInstance build_configured_instance(const ExperimentConfig& config) {
  const auto& ic = config.instance;
  if (!ic.file.empty()) {
    if (!fs::exists(ic.file)) throw ConfigError("instance file not found: " + ic.file);
    return load_instance(ic.file);
  }
  if (ic.generator == "benchmark")
    return make_benchmark_instance(ic.n_agents, ic.p, ic.q, ic.seed, ic.mu, ic.operating_radius);
  if (ic.generator == "random_quadratic")
    return make_random_quadratic_instance(ic.n_agents, ic.p, ic.seed);
  // quadratic_equality: explicit centers/b or seeded random ones.
  std::vector<Eigen::VectorXd> centers = ic.centers;
  Eigen::VectorXd b = ic.coupling_b;
  if (centers.empty()) {
    std::mt19937_64 rng(ic.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < ic.n_agents; ++i)
      centers.push_back(
          Eigen::VectorXd::NullaryExpr(ic.dim, [&](Eigen::Index) { return normal(rng); }));
    b = Eigen::VectorXd::NullaryExpr(ic.dim, [&](Eigen::Index) { return normal(rng); });
  }
  return make_quadratic_equality_instance(static_cast<int>(centers.size()), centers, b);
}

ResolvedRun resolve_run_params(const ExperimentConfig& config, const ProblemInstance& instance) {
  ResolvedRun out;
  out.smoothness = smoothness_constant(instance);
  out.rho = config.run.rho.value_or(out.smoothness > 0.0 ? 0.9 / (2.0 * out.smoothness) : 0.45);
  out.gamma = config.run.gamma.value_or(1.0 / out.rho);
  if (out.smoothness > 0.0 && out.rho >= 0.5 / out.smoothness)
    out.warnings.push_back("rho=" + fmt_sci(out.rho) + " violates rho < 1/(2L), L=" +
                           fmt_sci(out.smoothness));
  if (std::abs(out.gamma * out.rho - 1.0) > 1e-12)
    out.warnings.push_back("gamma=" + fmt_sci(out.gamma) + " differs from 1/rho");
  return out;
}

namespace {

std::vector<long> default_checkpoints(long rounds) {
  std::vector<long> cps;
  for (long c = 100; c <= rounds; c *= 10) cps.push_back(c);
  if (cps.empty() || cps.back() != rounds) cps.push_back(rounds);
  return cps;
}

json config_echo_json(const ExperimentConfig& config, const ResolvedRun& resolved,
                      long rounds_override) {
  json j;
  json ji;
  if (!config.instance.file.empty()) {
    ji["file"] = config.instance.file;
  } else {
    ji["generator"] = config.instance.generator;
    ji["n_agents"] = config.instance.n_agents;
    ji["p"] = config.instance.p;
    ji["q"] = config.instance.q;
    ji["dim"] = config.instance.dim;
    ji["seed"] = config.instance.seed;
    ji["mu"] = config.instance.mu;
    ji["operating_radius"] = config.instance.operating_radius;
  }
  j["instance"] = std::move(ji);
  j["graph"] = {{"n_cycles", config.graph.n_cycles},
                {"seed", config.graph.seed},
                {"export_edges", config.graph.export_edges}};
  j["run"] = {{"rho", resolved.rho}, {"gamma", resolved.gamma}, {"rounds", rounds_override}};
  j["inner"] = {{"tol", config.inner.tol},
                {"max_iter", config.inner.max_iter},
                {"allow_subgradient_fallback", config.inner.allow_subgradient_fallback}};
  j["reference"] = {{"mode", config.reference.mode}, {"tol", config.reference.tol}};
  if (!config.reference.file.empty()) j["reference"]["file"] = config.reference.file;
  json jo;
  jo["dir"] = config.output.dir;
  jo["downsample_after"] = config.output.downsample_after;
  jo["downsample_stride"] = config.output.downsample_stride;
  jo["dual_gap_stride"] = config.output.dual_gap_stride;
  jo["checkpoints"] = config.output.checkpoints.empty() ? default_checkpoints(rounds_override)
                                                        : config.output.checkpoints;
  j["output"] = std::move(jo);
  j["initial_x"] = config.initial_x;
  j["threads"] = config.threads;
  j["resolved"] = {{"smoothness", resolved.smoothness}, {"warnings", resolved.warnings}};
  return j;
}

struct PreparedRun {
  ProblemInstance instance;
  GraphSequence graphs;
  RunParams params;
  RunOptions options;
  std::optional<ReferenceSolution> reference;
  ResolvedRun resolved;
};

PreparedRun prepare_run(const ExperimentConfig& config) {
  ProblemInstance instance = build_configured_instance(config);
  GraphSequence graphs =
      generate_graph_sequence(instance.n_agents(), config.graph.n_cycles, config.graph.seed);
  ResolvedRun resolved = resolve_run_params(config, instance);

  RunParams params;
  params.rho = resolved.rho;
  params.gamma = resolved.gamma;
  params.rounds = config.run.rounds;

  RunOptions options;
  options.record_every_after = config.output.downsample_after;
  options.record_stride = config.output.downsample_stride;
  options.dual_gap_stride = config.output.dual_gap_stride;
  options.zeta_checkpoint_rounds = config.output.checkpoints.empty()
                                       ? default_checkpoints(config.run.rounds)
                                       : config.output.checkpoints;
  options.threads = config.threads;
  options.initial_x = config.initial_x;
  options.seed = config.instance.seed;

  std::optional<ReferenceSolution> reference;
  if (config.reference.mode == "solve") {
    reference = solve_centralized(instance, config.reference.tol);
  } else if (config.reference.mode == "load") {
    if (!fs::exists(config.reference.file))
      throw ConfigError("reference file not found: " + config.reference.file);
    // Reference files are written next to the instance by cmd_run.
    std::ifstream in(config.reference.file);
    json j;
    in >> j;
    ReferenceSolution ref;
    ref.x_star = vector_from_json(j.at("x_star"));
    ref.f_star = j.at("f_star").get<double>();
    ref.u_star = vector_from_json(j.at("u_star"));
    ref.y_star = vector_from_json(j.at("y_star"));
    for (const auto& v : j.at("v_star")) ref.v_star.push_back(vector_from_json(v));
    for (const auto& z : j.at("z_star")) ref.z_star.push_back(vector_from_json(z));
    reference = std::move(ref);
  }
  return PreparedRun{std::move(instance), std::move(graphs), params, std::move(options),
                     std::move(reference), std::move(resolved)};
}

void save_reference(const ReferenceSolution& ref, const std::string& path) {
  json j;
  j["x_star"] = to_json(ref.x_star);
  j["f_star"] = ref.f_star;
  j["u_star"] = to_json(ref.u_star);
  j["y_star"] = to_json(ref.y_star);
  json vs = json::array(), zs = json::array();
  for (const auto& v : ref.v_star) vs.push_back(to_json(v));
  for (const auto& z : ref.z_star) zs.push_back(to_json(z));
  j["v_star"] = std::move(vs);
  j["z_star"] = std::move(zs);
  j["residuals"] = {{"stationarity", ref.residuals.stationarity},
                    {"eq_residual", ref.residuals.eq_residual},
                    {"ineq_violation", ref.residuals.ineq_violation},
                    {"complementarity", ref.residuals.complementarity},
                    {"zero_sum_v", ref.residuals.zero_sum_v},
                    {"zero_sum_z", ref.residuals.zero_sum_z}};
  std::ofstream out(path);
  out << j.dump(1) << '\n';
}

}  // namespace

int cmd_run(const ExperimentConfig& config) {
  PreparedRun prep = prepare_run(config);
  fs::create_directories(config.output.dir);

  save_instance(prep.instance, (fs::path(config.output.dir) / "instance.json").string());
  if (prep.reference)
    save_reference(*prep.reference, (fs::path(config.output.dir) / "reference.json").string());
  if (config.graph.export_edges)
    export_edges_csv(prep.graphs, std::min<long>(config.run.rounds + 1, 1001),
                     (fs::path(config.output.dir) / "graph_edges.csv").string());

  {
    std::ofstream out(fs::path(config.output.dir) / "params_echo.json");
    out << config_echo_json(config, prep.resolved, config.run.rounds).dump(1) << '\n';
  }

  RunTrace trace = run(prep.instance, prep.graphs, prep.params, config.inner,
                       prep.reference ? &*prep.reference : nullptr, prep.options);
  write_trace(trace, config.output.dir);

  for (const std::string& w : prep.resolved.warnings) std::cerr << "warning: " << w << '\n';
  for (const std::string& w : trace.warnings) std::cerr << "warning: " << w << '\n';

  std::cout << "rounds: " << trace.rounds_completed << "/" << prep.params.rounds << '\n';
  if (!trace.metrics.empty()) {
    const RoundMetrics& last = trace.metrics.back();
    if (last.objective_gap) std::cout << "final objective gap: " << fmt_sci(*last.objective_gap) << '\n';
    std::cout << "final eq feasibility gap: " << fmt_sci(last.eq_feasibility) << '\n';
    std::cout << "final ineq feasibility gap: " << fmt_sci(last.ineq_feasibility) << '\n';
  }
  std::cout << "outputs in " << config.output.dir << '\n';
  if (trace.failure) {
    std::cerr << "solver failure at round " << trace.failure->round << " (agent "
              << trace.failure->agent << "): " << trace.failure->what << '\n';
    return 2;
  }
  return 0;
}

std::vector<CheckResult> validate_experiment(const ExperimentConfig& config) {
  std::vector<CheckResult> checks;
  ProblemInstance instance = build_configured_instance(config);
  std::mt19937_64 rng(config.instance.seed ^ 0x5eedu);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Declared strong convexity, sampled: f(y) >= f(x) + <s, y-x> + mu/2 |y-x|^2.
  {
    bool pass = instance.mu() > 0.0;
    std::string detail = pass ? "" : "declared mu is not positive";
    const double mu = instance.mu();
    for (int i = 0; i < instance.n_agents() && pass; ++i) {
      const AgentProblem& agent = instance.agent(i);
      const double l1 = instance.data().agents[static_cast<std::size_t>(i)].l1_weight;
      for (int s = 0; s < 20 && pass; ++s) {
        const Eigen::VectorXd xa = Eigen::VectorXd::NullaryExpr(
            agent.dim, [&](Eigen::Index) { return 2.0 * normal(rng); });
        const Eigen::VectorXd xb = Eigen::VectorXd::NullaryExpr(
            agent.dim, [&](Eigen::Index) { return 2.0 * normal(rng); });
        // sign(x) picks a valid subgradient of the l1 part.
        const Eigen::VectorXd sub =
            agent.smooth.gradient(xa) +
            l1 * xa.unaryExpr([](double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); });
        const double lhs = agent.objective_value(xb);
        const double rhs = agent.objective_value(xa) + sub.dot(xb - xa) +
                           0.5 * mu * (xb - xa).squaredNorm();
        if (lhs < rhs - 1e-9 * (1.0 + std::abs(rhs))) {
          pass = false;
          detail = "agent " + std::to_string(i) + " violates the mu-strong convexity inequality";
        }
      }
    }
    checks.push_back({"strong_convexity", pass, detail});
  }

  // Subgradient bound on the operating ball.
  if (instance.q() > 0) {
    bool pass = true;
    std::string detail;
    const double lg = instance.subgradient_bound();
    const double radius = instance.operating_radius();
    for (int i = 0; i < instance.n_agents() && pass; ++i) {
      const AgentProblem& agent = instance.agent(i);
      for (int s = 0; s < 50 && pass; ++s) {
        Eigen::VectorXd x =
            Eigen::VectorXd::NullaryExpr(agent.dim, [&](Eigen::Index) { return normal(rng); });
        if (x.norm() > 0.0) x *= std::min(1.0, radius / x.norm());
        const Eigen::MatrixXd jac = agent.inequality.jacobian(x);
        for (int l = 0; l < jac.rows(); ++l) {
          if (jac.row(l).norm() > lg + 1e-9) {
            pass = false;
            detail = "agent " + std::to_string(i) + " exceeds L_g on the operating ball";
          }
        }
      }
    }
    checks.push_back({"subgradient_bound", pass, detail});
  }

  // Slater certificate.
  {
    const auto slater = instance.slater_point();
    if (slater) {
      auto [eq, ineq] = coupling_residuals(instance, *slater);
      const bool eq_ok = eq.norm() <= 1e-9 * (1.0 + eq.size());
      const bool ineq_ok = instance.q() == 0 || ineq.maxCoeff() < 0.0;
      checks.push_back({"slater_certificate", eq_ok && ineq_ok,
                        "eq residual " + fmt_sci(eq.norm()) +
                            (instance.q() > 0 ? ", max sum g " + fmt_sci(ineq.maxCoeff()) : "")});
    } else {
      checks.push_back({"slater_certificate", true, "no certificate recorded (skipped)"});
    }
  }

  // Graph and weight validation over the first 100 rounds.
  {
    GraphSequence graphs =
        generate_graph_sequence(instance.n_agents(), config.graph.n_cycles, config.graph.seed);
    bool pass = true;
    std::string detail;
    for (long k = 0; k <= 100 && pass; ++k) {
      const auto round = graphs.round(k);
      const WeightValidation report = validate_weight_matrix(round.weights, round.graph);
      // Round 0 is the self-loop graph with identity weights by construction;
      // strong connectivity applies from round 1 on.
      const bool connected = k == 0 || check_strong_connectivity(round.graph);
      if (!report.pass || !connected || !round.graph.has_all_self_loops()) {
        pass = false;
        detail = "round " + std::to_string(k) + " failed validation";
      }
      if (k == 0 && !round.weights.entries.isIdentity(0.0)) {
        pass = false;
        detail = "round 0 weights are not the identity";
      }
    }
    checks.push_back({"graph_sequence", pass, detail});
  }
  return checks;
}

int cmd_validate(const ExperimentConfig& config) {
  ProblemInstance instance = build_configured_instance(config);
  const ResolvedRun resolved = resolve_run_params(config, instance);
  const auto checks = validate_experiment(config);
  bool all = true;
  for (const CheckResult& c : checks) {
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name;
    if (!c.detail.empty()) std::cout << ": " << c.detail;
    std::cout << '\n';
    all = all && c.pass;
  }
  std::cout << "L = " << fmt_sci(resolved.smoothness) << ", auto rho = " << fmt_sci(resolved.rho)
            << ", auto gamma = " << fmt_sci(resolved.gamma) << '\n';
  for (const std::string& w : resolved.warnings) std::cout << "warning: " << w << '\n';
  std::cout << (all ? "all checks passed" : "some checks failed") << '\n';
  return 0;
}

int cmd_sweep(const ExperimentConfig& config, const std::string& parameter,
              const std::vector<double>& values) {
  const std::set<std::string> supported{"rho", "gamma", "K", "n_cycles", "inner_tol"};
  if (!supported.count(parameter))
    throw ConfigError("sweep parameter must be one of rho, gamma, K, n_cycles, inner_tol");
  if (values.empty()) throw ConfigError("sweep requires a non-empty list of values");

  fs::create_directories(config.output.dir);
  std::ofstream summary(fs::path(config.output.dir) / "sweep_summary.csv");
  summary << "value,status,final_obj_gap,final_eq_feas,final_ineq_feas,dual_gap_slope\n";

  for (double value : values) {
    ExperimentConfig point = config;
    if (parameter == "rho") point.run.rho = value;
    if (parameter == "gamma") point.run.gamma = value;
    if (parameter == "K") point.run.rounds = static_cast<long>(value);
    if (parameter == "n_cycles") point.graph.n_cycles = static_cast<int>(value);
    if (parameter == "inner_tol") point.inner.tol = value;
    std::ostringstream dir;
    dir << config.output.dir << "/sweep_" << parameter << "_" << value;
    point.output.dir = dir.str();

    summary << fmt_sci(value) << ',';
    try {
      PreparedRun prep = prepare_run(point);
      fs::create_directories(point.output.dir);
      {
        std::ofstream echo(fs::path(point.output.dir) / "params_echo.json");
        echo << config_echo_json(point, prep.resolved, point.run.rounds).dump(1) << '\n';
      }
      RunTrace trace = run(prep.instance, prep.graphs, prep.params, point.inner,
                           prep.reference ? &*prep.reference : nullptr, prep.options);
      write_trace(trace, point.output.dir);
      const RoundMetrics& last = trace.metrics.back();
      summary << (trace.failure ? "solver_failure" : "ok") << ',';
      summary << (last.objective_gap ? fmt_sci(*last.objective_gap) : "") << ','
              << fmt_sci(last.eq_feasibility) << ',' << fmt_sci(last.ineq_feasibility) << ',';
      try {
        summary << fmt_sci(fit_rate(trace, "dual_gap", std::max(1L, point.run.rounds / 100),
                                    point.run.rounds));
      } catch (const std::invalid_argument&) {
        // slope undefined (too few positive samples)
      }
      summary << '\n';
    } catch (const std::exception& e) {
      summary << "error: " << e.what() << ",,,\n";
    }
  }
  std::cout << "sweep summary in " << config.output.dir << "/sweep_summary.csv\n";
  return 0;
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Distributed coupled-optimization simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  long rounds = -1;
  int threads = -1;
  std::string sweep_param;
  std::vector<double> sweep_values;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")
        ->envname("DCO_CONFIG")
        ->required();
    cmd->add_option("--out", out_dir, "output directory override")->envname("DCO_OUT");
    cmd->add_option("--rounds", rounds, "round count override")->envname("DCO_ROUNDS");
    cmd->add_option("--threads", threads, "worker threads, 0 = auto")->envname("DCO_THREADS");
  };

  CLI::App* c_run = app.add_subcommand("run", "execute a configured experiment");
  add_common(c_run);
  CLI::App* c_validate = app.add_subcommand("validate", "check assumptions and the graph sequence");
  add_common(c_validate);
  CLI::App* c_sweep = app.add_subcommand("sweep", "run one experiment per parameter value");
  add_common(c_sweep);
  c_sweep->add_option("--param", sweep_param, "rho | gamma | K | n_cycles | inner_tol")
      ->required();
  c_sweep->add_option("--values", sweep_values, "values to sweep")->required()->expected(-1);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    ExperimentConfig config = parse_config_file(config_path);
    if (!out_dir.empty()) config.output.dir = out_dir;
    if (rounds >= 0) config.run.rounds = rounds;
    if (threads >= 0) config.threads = threads;
    if (app.got_subcommand(c_run)) return cmd_run(config);
    if (app.got_subcommand(c_validate)) return cmd_validate(config);
    return cmd_sweep(config, sweep_param, sweep_values);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return 3;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace dco
