#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace dco {

/// Row/column sum tolerance for accepting a matrix as doubly stochastic.
/// The permutation-union construction is exact up to rounding, so this is
/// deliberately tight.
inline constexpr double kDoublyStochasticTol = 1e-12;

/// Directed communication graph on agents 0..n_agents-1.
/// An edge (j, i) means j -> i: agent i can receive from agent j.
struct Digraph {
  int n_agents = 0;
  std::set<std::pair<int, int>> edges;

  bool has_edge(int from, int to) const { return edges.count({from, to}) > 0; }
  bool has_all_self_loops() const;
};

/// Mixing matrix paired with a digraph: entries(i, j) > 0 iff (j, i) is an
/// edge. Matrices assembled from a convex combination of permutation
/// matrices keep the decomposition around; mixing through it lets the
/// allocation updates telescope exactly (see mix_duals).
struct WeightMatrix {
  Eigen::MatrixXd entries;
  /// permutations[m][i] is the agent whose value feeds row i under P_m.
  std::vector<std::vector<int>> permutations;
  std::vector<double> mixing_weights;

  bool has_decomposition() const { return !permutations.empty(); }
  int size() const { return static_cast<int>(entries.rows()); }
};

struct WeightValidation {
  bool pass = false;
  double max_row_deviation = 0.0;
  double max_col_deviation = 0.0;
  double min_entry = 0.0;
  /// (j, i) pairs where positivity of entries(i, j) disagrees with the edge set.
  std::vector<std::pair<int, int>> support_mismatches;
};

/// True iff the whole vertex set is one strongly connected component.
bool check_strong_connectivity(const Digraph& g);

/// All j with (j, agent) in edges, sorted. Always contains `agent` on
/// graphs with self-loops. Throws std::invalid_argument for unknown ids.
std::vector<int> in_neighbors(const Digraph& g, int agent);

/// W = sum_m mixing_weights[m] * P_m. The identity must be among the
/// permutations and the union of their edges plus self-loops must equal the
/// digraph exactly; otherwise SupportMismatch is thrown.
WeightMatrix build_weight_matrix(const Digraph& g,
                                 const std::vector<std::vector<int>>& permutations,
                                 const std::vector<double>& mixing_weights);

WeightValidation validate_weight_matrix(const WeightMatrix& w, const Digraph& g);

/// Time-varying graph source. Round 0 is always the self-loop-only graph
/// with identity weights. Every later round is the edge union of all
/// self-loops, one random full cycle (which makes the round strongly
/// connected), and n_cycles - 1 further random permutations, mixed
/// uniformly with the identity. Each round is a pure function of
/// (seed, round index), so sequences are reproducible and random access.
class GraphSequence {
 public:
  struct Round {
    Digraph graph;
    WeightMatrix weights;
  };

  GraphSequence(int n_agents, int n_cycles, std::uint64_t seed);

  Round round(long k) const;

  int n_agents() const { return n_agents_; }
  int n_cycles() const { return n_cycles_; }
  std::uint64_t seed() const { return seed_; }

 private:
  int n_agents_;
  int n_cycles_;
  std::uint64_t seed_;
};

GraphSequence generate_graph_sequence(int n_agents, int n_cycles, std::uint64_t seed);

/// Writes rounds 0..rounds-1 as CSV rows: round, from, to, weight.
void export_edges_csv(const GraphSequence& seq, long rounds, const std::string& path);

}  // namespace dco
