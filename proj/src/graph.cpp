#include "dco/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "dco/errors.hpp"
#include "format_util.hpp"

namespace dco {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::vector<int> identity_permutation(int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

bool is_permutation_vector(const std::vector<int>& p, int n) {
  if (static_cast<int>(p.size()) != n) return false;
  std::vector<bool> seen(n, false);
  for (int v : p) {
    if (v < 0 || v >= n || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

/// Permutation whose edge set is a single directed cycle through every node.
std::vector<int> random_full_cycle(int n, std::mt19937_64& rng) {
  std::vector<int> order = identity_permutation(n);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> perm(n);
  for (int t = 0; t < n; ++t) perm[order[(t + 1) % n]] = order[t];
  return perm;
}

std::vector<int> random_permutation(int n, std::mt19937_64& rng) {
  std::vector<int> perm = identity_permutation(n);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

Digraph self_loop_graph(int n) {
  Digraph g;
  g.n_agents = n;
  for (int i = 0; i < n; ++i) g.edges.insert({i, i});
  return g;
}

}  // namespace

bool Digraph::has_all_self_loops() const {
  for (int i = 0; i < n_agents; ++i)
    if (!has_edge(i, i)) return false;
  return true;
}

bool check_strong_connectivity(const Digraph& g) {
  const int n = g.n_agents;
  if (n <= 0) return false;
  if (n == 1) return true;

  std::vector<std::vector<int>> out(n), in(n);
  for (const auto& [from, to] : g.edges) {
    if (from < 0 || from >= n || to < 0 || to >= n)
      throw std::invalid_argument("digraph edge references unknown agent");
    out[from].push_back(to);
    in[to].push_back(from);
  }

  auto reaches_all = [n](const std::vector<std::vector<int>>& adj) {
    std::vector<bool> seen(n, false);
    std::vector<int> stack{0};
    seen[0] = true;
    int count = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj[v]) {
        if (!seen[w]) {
          seen[w] = true;
          ++count;
          stack.push_back(w);
        }
      }
    }
    return count == n;
  };

  return reaches_all(out) && reaches_all(in);
}

std::vector<int> in_neighbors(const Digraph& g, int agent) {
  if (agent < 0 || agent >= g.n_agents)
    throw std::invalid_argument("in_neighbors: unknown agent id " + std::to_string(agent));
  std::vector<int> result;
  for (const auto& [from, to] : g.edges)
    if (to == agent) result.push_back(from);
  std::sort(result.begin(), result.end());
  return result;
}

WeightMatrix build_weight_matrix(const Digraph& g,
                                 const std::vector<std::vector<int>>& permutations,
                                 const std::vector<double>& mixing_weights) {
  const int n = g.n_agents;
  if (permutations.empty() || permutations.size() != mixing_weights.size())
    throw std::invalid_argument("build_weight_matrix: need one weight per permutation");

  double weight_sum = 0.0;
  for (double w : mixing_weights) {
    if (!(w > 0.0)) throw std::invalid_argument("build_weight_matrix: weights must be positive");
    weight_sum += w;
  }
  if (std::abs(weight_sum - 1.0) > kDoublyStochasticTol)
    throw std::invalid_argument("build_weight_matrix: weights must sum to 1");

  const std::vector<int> id = identity_permutation(n);
  bool has_identity = false;
  std::set<std::pair<int, int>> support;
  for (const auto& perm : permutations) {
    if (!is_permutation_vector(perm, n))
      throw std::invalid_argument("build_weight_matrix: not a permutation of the agent set");
    if (perm == id) has_identity = true;
    for (int i = 0; i < n; ++i) support.insert({perm[i], i});
  }
  if (!has_identity)
    throw std::invalid_argument("build_weight_matrix: identity permutation must be included");
  for (int i = 0; i < n; ++i) support.insert({i, i});
  if (support != g.edges)
    throw SupportMismatch("build_weight_matrix: permutation edges do not match the digraph");

  WeightMatrix w;
  w.entries = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t m = 0; m < permutations.size(); ++m)
    for (int i = 0; i < n; ++i) w.entries(i, permutations[m][i]) += mixing_weights[m];
  w.permutations = permutations;
  w.mixing_weights = mixing_weights;
  return w;
}

WeightValidation validate_weight_matrix(const WeightMatrix& w, const Digraph& g) {
  const int n = g.n_agents;
  if (w.entries.rows() != w.entries.cols())
    throw std::invalid_argument("validate_weight_matrix: matrix must be square");
  if (w.size() != n)
    throw std::invalid_argument("validate_weight_matrix: matrix size does not match digraph");

  WeightValidation report;
  report.min_entry = n > 0 ? w.entries.minCoeff() : 0.0;
  for (int i = 0; i < n; ++i) {
    report.max_row_deviation =
        std::max(report.max_row_deviation, std::abs(w.entries.row(i).sum() - 1.0));
    report.max_col_deviation =
        std::max(report.max_col_deviation, std::abs(w.entries.col(i).sum() - 1.0));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const bool positive = w.entries(i, j) > 0.0;
      const bool edge = g.has_edge(j, i);
      if (positive != edge) report.support_mismatches.push_back({j, i});
    }
  }
  report.pass = report.max_row_deviation <= kDoublyStochasticTol &&
                report.max_col_deviation <= kDoublyStochasticTol &&
                report.min_entry >= 0.0 && report.support_mismatches.empty();
  return report;
}

GraphSequence::GraphSequence(int n_agents, int n_cycles, std::uint64_t seed)
    : n_agents_(n_agents), n_cycles_(n_cycles), seed_(seed) {
  if (n_agents < 1) throw std::invalid_argument("GraphSequence: n_agents must be >= 1");
  if (n_cycles < 1) throw std::invalid_argument("GraphSequence: n_cycles must be >= 1");
}

GraphSequence::Round GraphSequence::round(long k) const {
  if (k < 0) throw std::invalid_argument("GraphSequence::round: negative round index");

  const int n = n_agents_;
  Digraph g = self_loop_graph(n);
  std::vector<std::vector<int>> perms{identity_permutation(n)};

  if (k > 0) {
    std::mt19937_64 rng(splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(k))));
    perms.push_back(random_full_cycle(n, rng));
    for (int c = 1; c < n_cycles_; ++c) perms.push_back(random_permutation(n, rng));
    for (std::size_t m = 1; m < perms.size(); ++m)
      for (int i = 0; i < n; ++i) g.edges.insert({perms[m][i], i});
  }

  std::vector<double> weights(perms.size(), 1.0 / static_cast<double>(perms.size()));
  Round out;
  out.weights = build_weight_matrix(g, perms, weights);
  out.graph = std::move(g);
  return out;
}

GraphSequence generate_graph_sequence(int n_agents, int n_cycles, std::uint64_t seed) {
  return GraphSequence(n_agents, n_cycles, seed);
}

void export_edges_csv(const GraphSequence& seq, long rounds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_edges_csv: cannot open " + path);
  out << "round,from,to,weight\n";
  for (long k = 0; k < rounds; ++k) {
    const auto r = seq.round(k);
    for (const auto& [from, to] : r.graph.edges)
      out << k << ',' << from << ',' << to << ',' << fmt_sci(r.weights.entries(to, from))
          << '\n';
  }
}

}  // namespace dco
