#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace lwr {

using Time = std::int64_t;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Agent 0 is the truth agent. Edge (i, j) means "i receives from j" at that
// step. The number of sources of i is sometimes called its outdegree; here it
// is the receive count.
class Graph {
 public:
  explicit Graph(int agents = 0) : sources_(static_cast<std::size_t>(agents) + 1) {}

  int agents() const { return static_cast<int>(sources_.size()) - 1; }

  // Adds (receiver, source). Throws on endpoints outside {0..n}, on edges out
  // of the truth agent, and on self-loops unless allow_self_loop is set.
  void add_edge(int receiver, int source, bool allow_self_loop = false);

  const std::vector<int>& sources(int receiver) const {
    return sources_[static_cast<std::size_t>(receiver)];
  }
  int degree(int receiver) const { return receiver == 0 ? 0 : static_cast<int>(sources(receiver).size()); }
  bool hears_truth(int receiver) const;

  bool operator==(const Graph&) const = default;

 private:
  std::vector<std::vector<int>> sources_;
};

enum class PeerRule { none, ring, complete, edge_list };

PeerRule parse_peer_rule(std::string_view name);
std::string_view to_string(PeerRule rule);

// Immutable map t -> Graph. Generator-backed so long horizons need no tables;
// adaptive and table schedules carry a horizon past which queries throw.
class GraphSchedule {
 public:
  using Generator = std::function<Graph(Time)>;

  GraphSchedule(int agents, Generator generator, std::optional<Time> horizon, std::string kind);

  int agents() const { return agents_; }
  const std::optional<Time>& horizon() const { return horizon_; }
  const std::string& kind() const { return kind_; }

  // Throws std::out_of_range for t < 0 or t >= horizon.
  Graph graph_at(Time t) const;

 private:
  int agents_;
  Generator generator_;
  std::optional<Time> horizon_;
  std::string kind_;
};

struct DegreeMatrix {
  std::vector<int> diag;  // diag[0] == 0 always

  int max() const;
  Matrix as_matrix() const;
};

// Diagonal of P_t = (tau0/tau) I + sum_{k<t} D_k, kept as integer counts plus
// the ratio so that long runs do not accumulate rounding drift.
class PrecisionLedger {
 public:
  PrecisionLedger(int agents, double ratio);

  double ratio() const { return ratio_; }
  Time time() const { return time_; }
  int agents() const { return static_cast<int>(counts_.size()) - 1; }

  double diag(int i) const { return ratio_ + static_cast<double>(counts_[static_cast<std::size_t>(i)]); }
  std::int64_t count(int i) const { return counts_[static_cast<std::size_t>(i)]; }
  Vector diagonal() const;
  Matrix as_matrix() const;

  void advance(const DegreeMatrix& degrees);
  void advance(const Graph& graph);

  bool operator==(const PrecisionLedger&) const = default;

 private:
  double ratio_;
  Time time_ = 0;
  std::vector<std::int64_t> counts_;
};

Matrix adjacency_matrix(const Graph& graph);
Matrix adjacency_at(const GraphSchedule& schedule, Time t);

DegreeMatrix degree_at(const Matrix& adjacency);
DegreeMatrix degree_of(const Graph& graph);

PrecisionLedger precision_at(const GraphSchedule& schedule, Time t, double ratio);

// Largest receive count over [0, horizon).
int max_degree(const GraphSchedule& schedule, Time horizon);

struct TruthHearingVerdict {
  bool pass = true;
  int agent = 0;          // first violating agent, when !pass
  Time window_start = 0;  // start of the first violating window [start, start + kappa)
};

// Every agent i > 0 must receive from 0 in each window [t, t + kappa) with
// t + kappa <= horizon.
TruthHearingVerdict verify_truth_hearing(const GraphSchedule& schedule, Time kappa, Time horizon);

// True when every agent i > 0 has an edge (i, 0) somewhere in [start, start + kappa).
bool hears_truth_in_window(const GraphSchedule& schedule, Time start, Time kappa);

GraphSchedule make_empty_schedule(int agents);

// Agent i hears the truth at steps t with t % kappa == i % kappa; peer edges
// follow the rule at every step.
GraphSchedule make_periodic_schedule(int agents, Time kappa, PeerRule rule,
                                     std::vector<std::pair<int, int>> peer_edges = {});

// Peer edges i <- j (i != j, both > 0) are independent Bernoulli(p) draws per
// step; each agent additionally gets one truth edge per aligned block of
// ceil(kappa/2) steps at a uniformly drawn offset, so every window
// [t, t + kappa) contains one.
GraphSchedule make_random_schedule(int agents, Time kappa, double edge_probability, std::uint64_t seed);

struct TableEdge {
  Time t;
  int receiver;
  int source;
};

// Explicit edge table. Horizon defaults to (max t) + 1.
GraphSchedule make_table_schedule(int agents, const std::vector<TableEdge>& edges,
                                  std::optional<Time> horizon = std::nullopt);

// Parses "t i j" lines; blank lines and '#' comments are skipped.
std::vector<TableEdge> read_edge_table(std::istream& in);

// --- counterexample ---------------------------------------------------------

struct CounterexampleRule {
  // A pull phase in round k ends at the first t with
  // |y_{t,1} - y_{t,2}| <= 2^{-2k - threshold_offset}.
  int threshold_offset = 2;
};

struct CounterexampleSetup {
  double precision_ratio = 1.0;          // tau0 / tau
  double initial_agent1 = 2.0;           // relative to the truth
  double initial_agent2 = 2.0;
  Time horizon = 1'000'000;
  CounterexampleRule rule{};
};

struct SwitchRound {
  int k = 0;
  Time t_k = 0;                      // agent 1 hears the truth
  std::optional<Time> s_k;           // agent 2 hears the truth
  double y_tk_agent2 = 0.0;          // co-run expected value at t_k, agent 2
  std::optional<double> y_sk_agent1; // co-run expected value at s_k, agent 1
};

struct Counterexample {
  GraphSchedule schedule;
  std::vector<SwitchRound> rounds;  // rounds whose t_k < horizon
  double min_value = 0.0;           // min over t <= horizon of min(y_{t,1}, y_{t,2}), co-run
};

class ConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two-agent alternating schedule that keeps the expected means away from the
// truth while giving both agents infinitely many truth edges. Built by
// co-running the expected recursion; throws ConstructionError when the rule
// lets a guarded value fall below its bound.
Counterexample make_counterexample_schedule(const CounterexampleSetup& setup);

}  // namespace lwr
