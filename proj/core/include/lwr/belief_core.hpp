#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "lwr/graph_dynamics.hpp"
#include "lwr/rng.hpp"

namespace lwr {

struct SystemParams {
  int n = 1;
  double tau = 1.0;    // signal noise precision 1/sigma^2
  double tau0 = 1.0;   // initial belief precision 1/sigma0^2
  double truth = 0.0;
  std::vector<double> initial_means;  // length n, or a single value for all agents
  std::uint64_t seed = 0;
  bool truth_noise = true;  // truth-agent emissions carry N(0, 1/tau) noise
  bool zero_noise = false;  // force u = eps = 0 (the noisy step collapses to the expected one)

  double ratio() const { return tau0 / tau; }
  double initial_mean(int agent) const;
  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool operator==(const SystemParams&) const = default;
};

// Means x_t (entry 0 pinned to the truth) plus the precision ledger; agent
// precisions are tau * (P_t)_ii and do not depend on signal realizations.
class BeliefState {
 public:
  BeliefState(Vector means, PrecisionLedger ledger, double tau);

  static BeliefState initial(const SystemParams& params);

  const Vector& means() const { return means_; }
  const PrecisionLedger& ledger() const { return ledger_; }
  Time time() const { return ledger_.time(); }
  int agents() const { return ledger_.agents(); }
  double tau() const { return tau_; }

  // +infinity for the truth agent.
  double precision(int agent) const {
    return agent == 0 ? std::numeric_limits<double>::infinity() : tau_ * ledger_.diag(agent);
  }
  Vector precisions() const;

 private:
  Vector means_;
  PrecisionLedger ledger_;
  double tau_;
};

// One emission per agent per step, delivered identically to every listener.
struct SignalBatch {
  Vector theta;   // sampled state; theta_0 = truth
  Vector noise;   // epsilon
  Vector signal;  // a = theta + epsilon
};

// Draw order is fixed: for i = 1..n, theta_i then eps_i; then eps_0.
SignalBatch emit_signals(const BeliefState& state, const SystemParams& params, RngStream& rng);

struct Posterior {
  double mean;
  double precision;
};

// Conjugate Gaussian update with k received signals of precision tau each.
Posterior update_agent(double mean, double precision, std::span<const double> signals, double tau);

// Per-agent path: applies update_agent to every agent with the signals it
// receives in `graph`.
BeliefState apply_signals(const BeliefState& state, const Graph& graph, const SignalBatch& batch);

// Matrix path: x' = (P + D)^{-1} (P x + A a), with x'_0 pinned to x_0.
// Throws std::invalid_argument on dimension mismatch.
Vector step_mean_matrix_form(const Vector& means, const Matrix& adjacency, const Matrix& degrees,
                             const Matrix& precision_diag, const SignalBatch& batch);

BeliefState step_mean_process(const BeliefState& state, const Graph& graph, const SystemParams& params,
                              RngStream& rng, SignalBatch* emitted = nullptr);

struct RecordingOptions {
  Time every = 1;             // 0 disables periodic recording
  std::vector<Time> times;    // extra explicit times
  bool signals = false;
};

struct TrajectoryPoint {
  Time t;
  Vector means;
  Vector precisions;           // entry 0 is +inf
  std::optional<SignalBatch> signals;  // batch emitted at t, when requested and t < horizon
};

// t = 0 and t = horizon are always recorded.
struct Trajectory {
  double truth = 0.0;
  std::vector<TrajectoryPoint> points;

  const TrajectoryPoint& final() const { return points.back(); }
};

// Run `run_index` draws from the dynamics stream derive_seed(params.seed, dynamics, run_index).
Trajectory run_simulation(const GraphSchedule& schedule, const SystemParams& params, Time horizon,
                          const RecordingOptions& recording = {}, std::uint64_t run_index = 0);

// Independent runs 0..runs-1, executed on up to `threads` workers (0 = hardware
// concurrency). Output order is by run index regardless of scheduling.
std::vector<Trajectory> run_ensemble(const GraphSchedule& schedule, const SystemParams& params, Time horizon,
                                     int runs, const RecordingOptions& recording = {}, unsigned threads = 0);

struct EnsembleSummary {
  std::vector<Time> times;
  std::vector<Vector> mean;      // per recorded time, across runs
  std::vector<Vector> variance;  // unbiased; zero when runs == 1
  int runs = 0;
};

EnsembleSummary summarize(const std::vector<Trajectory>& runs);

}  // namespace lwr
