#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "dco/agent.hpp"
#include "dco/graph.hpp"
#include "dco/metrics.hpp"
#include "dco/problem.hpp"
#include "dco/reference.hpp"

namespace dco {

/// Only the two dual kinds ever travel between agents; the other kinds
/// exist so tests can inject violations and see them flagged.
enum class PayloadKind { dual_equality, dual_inequality, primal, allocation };

const char* payload_kind_name(PayloadKind kind);

struct Message {
  long round = 0;
  int from = 0;
  int to = 0;
  PayloadKind kind = PayloadKind::dual_equality;
  Eigen::VectorXd payload;
};

struct AuditViolation {
  long round = 0;
  int from = 0;
  int to = 0;
  PayloadKind kind = PayloadKind::dual_equality;
  std::string reason;
};

/// Per-edge message bookkeeping. Every logged message is validated against
/// the round's graph on the spot; only the aggregate counts and any
/// violations are retained.
class MessageAudit {
 public:
  void begin_round(long round, const Digraph& graph);
  /// The one dual exchange j -> i of a mixing step (u then y payload kinds).
  void log_mixing_edge(int from, int to, int eq_dim, int ineq_dim);
  /// Arbitrary message, same validation path; used by test hooks.
  void log(const Message& message);

  struct EdgeKey {
    int from;
    int to;
    PayloadKind kind;
    bool operator<(const EdgeKey& o) const {
      return std::tie(from, to, kind) < std::tie(o.from, o.to, o.kind);
    }
  };

  const std::map<EdgeKey, long>& counts() const { return counts_; }
  const std::vector<AuditViolation>& violations() const { return violations_; }
  long total_messages() const { return total_messages_; }
  long total_scalars() const { return total_scalars_; }
  long rounds_logged() const { return rounds_logged_; }

 private:
  void record(long round, int from, int to, PayloadKind kind, long scalars);

  std::map<EdgeKey, long> counts_;
  std::vector<AuditViolation> violations_;
  long total_messages_ = 0;
  long total_scalars_ = 0;
  long rounds_logged_ = 0;
  long current_round_ = -1;
  const Digraph* current_graph_ = nullptr;
};

struct AuditReport {
  bool pass = false;
  std::vector<AuditViolation> violations;
  long total_messages = 0;
  long total_scalars = 0;
};

struct FailureRecord {
  long round = 0;
  int agent = -1;
  std::string what;
};

struct DualGapSample {
  long round = 0;
  double gap = 0.0;
  std::optional<double> gap_running_average;
};

struct ZetaCheckpoint {
  long rounds = 0;  // number of iterates averaged (k = 0 .. rounds-1)
  std::vector<DualPoint> zeta_bar;
};

/// Test seams. extra_messages runs inside each mixing phase; post_allocation
/// may corrupt states to exercise the invariant tripwire.
struct SimulatorHooks {
  std::function<void(long round, MessageAudit&)> extra_messages;
  std::function<void(long round, std::vector<AgentState>&)> post_allocation;
};

struct RunOptions {
  long record_every_after = 1000;  // record all rounds up to here ...
  long record_stride = 10;         // ... then every record_stride-th
  long dual_gap_stride = 10;       // in recorded rounds
  std::vector<long> zeta_checkpoint_rounds;
  int threads = 1;
  std::string initial_x = "zeros";  // "zeros" | "random"
  std::uint64_t seed = 0;           // feeds the random x0 draw
  std::vector<Eigen::VectorXd> initial_u, initial_y;  // empty = zeros
  double zero_sum_hard_cap = 1e-6;
  SimulatorHooks hooks;
};

/// Everything a run leaves behind. worst_zero_sum_* track
/// ||sum_i .|| / (1 + max_i ||.||) over every round, not just recorded ones.
struct RunTrace {
  std::vector<RoundMetrics> metrics;
  std::vector<DualGapSample> dual_gaps;
  std::vector<ZetaCheckpoint> zeta_checkpoints;
  MessageAudit audit;
  std::vector<AgentState> final_states;
  std::vector<std::string> warnings;
  double worst_zero_sum_v = 0.0;
  double worst_zero_sum_z = 0.0;
  double wall_seconds = 0.0;
  long rounds_completed = 0;
  bool completed = false;
  std::optional<FailureRecord> failure;
  RunParams params;
  InnerSolveParams inner;
  double smoothness = 0.0;  // L for the instance, echoed for diagnostics
};

/// Synchronous lock-step execution of the algorithm: local updates on the
/// round-k mixed values, one dual exchange over graph k+1, then allocation
/// updates, with metrics against the reference when provided. Deterministic
/// for fixed seeds regardless of the thread count.
RunTrace run(const ProblemInstance& instance, const GraphSequence& graphs,
             const RunParams& params, const InnerSolveParams& inner,
             const ReferenceSolution* reference = nullptr, const RunOptions& options = {});

/// Pass iff every logged message was a dual kind on an edge of its round.
AuditReport audit_messages(const RunTrace& trace);

/// metrics.csv, primal_errors.csv, messages_audit.csv, final_state.json.
void write_trace(const RunTrace& trace, const std::string& directory);

}  // namespace dco
