#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dco/problem.hpp"
#include "dco/reference.hpp"
#include "dco/simulator.hpp"

namespace dco {

/// Parsed experiment config. Auto run parameters resolve to
/// rho = 0.9 / (2 L), gamma = 1 / rho just before the run and are echoed.
struct ExperimentConfig {
  struct Instance {
    std::string generator = "benchmark";  // benchmark | quadratic_equality | random_quadratic
    std::string file;                 // set = load instead of generate
    int n_agents = 20;
    int p = 25;
    int q = 1;
    int dim = 1;  // quadratic_equality block size
    std::uint64_t seed = 1;
    double mu = 1.0;
    double operating_radius = kDefaultOperatingRadius;
    std::vector<Eigen::VectorXd> centers;  // optional explicit quadratic_equality data
    Eigen::VectorXd coupling_b;
  } instance;

  struct Graph {
    int n_cycles = 2;
    std::uint64_t seed = 7;
    bool export_edges = false;
  } graph;

  struct Run {
    std::optional<double> rho;    // empty = auto
    std::optional<double> gamma;  // empty = auto
    long rounds = 10000;
  } run;

  InnerSolveParams inner;

  struct Reference {
    std::string mode = "solve";  // solve | load | none
    std::string file;
    double tol = 1e-10;
  } reference;

  struct Output {
    std::string dir = "out";
    long downsample_after = 1000;
    long downsample_stride = 10;
    long dual_gap_stride = 10;
    std::vector<long> checkpoints;  // empty = powers of ten up to rounds
  } output;

  std::string initial_x = "zeros";
  int threads = 1;
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

struct ResolvedRun {
  double rho = 0.0;
  double gamma = 0.0;
  double smoothness = 0.0;
  std::vector<std::string> warnings;
};

ResolvedRun resolve_run_params(const ExperimentConfig& config, const ProblemInstance& instance);

ProblemInstance build_configured_instance(const ExperimentConfig& config);

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Samples the convexity/subgradient/Slater assumptions and validates the
/// first rounds of the graph sequence.
std::vector<CheckResult> validate_experiment(const ExperimentConfig& config);

int cmd_run(const ExperimentConfig& config);
int cmd_validate(const ExperimentConfig& config);
int cmd_sweep(const ExperimentConfig& config, const std::string& parameter,
              const std::vector<double>& values);

/// Full CLI dispatch: subcommands run | validate | sweep. Returns the
/// process exit code (0 ok, 1 config error, 2 solver failure, 3 invariant
/// violation).
int run_cli(const std::vector<std::string>& args);

}  // namespace dco
