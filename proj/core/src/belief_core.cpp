#include "lwr/belief_core.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>

namespace lwr {

double SystemParams::initial_mean(int agent) const {
  if (initial_means.size() == 1) return initial_means.front();
  return initial_means.at(static_cast<std::size_t>(agent - 1));
}

void SystemParams::validate() const {
  if (n < 1) throw std::invalid_argument("params.n: need at least one learning agent");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("params.tau: must be positive and finite");
  if (!(tau0 > 0.0) || !std::isfinite(tau0)) {
    throw std::invalid_argument("params.tau0: must be positive and finite");
  }
  if (!std::isfinite(truth)) throw std::invalid_argument("params.truth: must be finite");
  if (initial_means.size() != 1 && initial_means.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("params.initial_means: expected 1 or " + std::to_string(n) + " values, got " +
                                std::to_string(initial_means.size()));
  }
  for (double m : initial_means) {
    if (!std::isfinite(m)) throw std::invalid_argument("params.initial_means: values must be finite");
  }
}

BeliefState::BeliefState(Vector means, PrecisionLedger ledger, double tau)
    : means_(std::move(means)), ledger_(std::move(ledger)), tau_(tau) {
  if (means_.size() != ledger_.agents() + 1) throw std::invalid_argument("means/ledger dimension mismatch");
}

BeliefState BeliefState::initial(const SystemParams& params) {
  params.validate();
  Vector x(params.n + 1);
  x[0] = params.truth;
  for (int i = 1; i <= params.n; ++i) x[i] = params.initial_mean(i);
  return BeliefState(std::move(x), PrecisionLedger(params.n, params.ratio()), params.tau);
}

Vector BeliefState::precisions() const {
  Vector p(agents() + 1);
  for (int i = 0; i <= agents(); ++i) p[i] = precision(i);
  return p;
}

SignalBatch emit_signals(const BeliefState& state, const SystemParams& params, RngStream& rng) {
  const int n = state.agents();
  SignalBatch batch{state.means(), Vector::Zero(n + 1), Vector()};
  if (!params.zero_noise) {
    const double noise_sd = 1.0 / std::sqrt(params.tau);
    for (int i = 1; i <= n; ++i) {
      batch.theta[i] = rng.normal(state.means()[i], 1.0 / std::sqrt(state.precision(i)));
      batch.noise[i] = rng.normal(0.0, noise_sd);
    }
    if (params.truth_noise) batch.noise[0] = rng.normal(0.0, noise_sd);
  }
  batch.signal = batch.theta + batch.noise;
  return batch;
}

Posterior update_agent(double mean, double precision, std::span<const double> signals, double tau) {
  if (signals.empty()) return {mean, precision};
  double sum = 0.0;
  for (double a : signals) sum += a;
  const double k = static_cast<double>(signals.size());
  const double updated = precision + k * tau;
  return {(precision * mean + tau * sum) / updated, updated};
}

BeliefState apply_signals(const BeliefState& state, const Graph& graph, const SignalBatch& batch) {
  const int n = state.agents();
  if (graph.agents() != n || batch.signal.size() != n + 1) {
    throw std::invalid_argument("apply_signals: dimension mismatch");
  }
  Vector next = state.means();
  std::vector<double> received;
  for (int i = 1; i <= n; ++i) {
    received.clear();
    for (int j : graph.sources(i)) received.push_back(batch.signal[j]);
    next[i] = update_agent(state.means()[i], state.precision(i), received, state.tau()).mean;
  }
  PrecisionLedger ledger = state.ledger();
  ledger.advance(graph);
  return BeliefState(std::move(next), std::move(ledger), state.tau());
}

Vector step_mean_matrix_form(const Vector& means, const Matrix& adjacency, const Matrix& degrees,
                             const Matrix& precision_diag, const SignalBatch& batch) {
  const Eigen::Index size = means.size();
  auto square = [size](const Matrix& m) { return m.rows() == size && m.cols() == size; };
  if (!square(adjacency) || !square(degrees) || !square(precision_diag) || batch.signal.size() != size) {
    throw std::invalid_argument("step_mean_matrix_form: dimension mismatch");
  }
  const Vector p = precision_diag.diagonal();
  const Vector denom = p + degrees.diagonal();
  Vector next = (p.cwiseProduct(means) + adjacency * batch.signal).cwiseQuotient(denom);
  next[0] = means[0];
  return next;
}

BeliefState step_mean_process(const BeliefState& state, const Graph& graph, const SystemParams& params,
                              RngStream& rng, SignalBatch* emitted) {
  SignalBatch batch = emit_signals(state, params, rng);
  BeliefState next = apply_signals(state, graph, batch);
  if (emitted) *emitted = std::move(batch);
  return next;
}

Trajectory run_simulation(const GraphSchedule& schedule, const SystemParams& params, Time horizon,
                          const RecordingOptions& recording, std::uint64_t run_index) {
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  if (schedule.agents() != params.n) throw std::invalid_argument("schedule and params disagree on n");

  std::vector<Time> extra = recording.times;
  std::sort(extra.begin(), extra.end());
  auto next_extra = extra.begin();
  auto wanted = [&](Time t) {
    while (next_extra != extra.end() && *next_extra < t) ++next_extra;
    return t == 0 || t == horizon || (recording.every > 0 && t % recording.every == 0) ||
           (next_extra != extra.end() && *next_extra == t);
  };

  Trajectory traj;
  traj.truth = params.truth;
  RngStream rng(params.seed, StreamId::dynamics, run_index);
  BeliefState state = BeliefState::initial(params);
  for (Time t = 0;; ++t) {
    const bool record = wanted(t);
    if (t == horizon) {
      if (record) traj.points.push_back({t, state.means(), state.precisions(), std::nullopt});
      break;
    }
    const Graph graph = schedule.graph_at(t);
    SignalBatch batch = emit_signals(state, params, rng);
    if (record) {
      traj.points.push_back({t, state.means(), state.precisions(),
                             recording.signals ? std::optional<SignalBatch>(batch) : std::nullopt});
    }
    state = apply_signals(state, graph, batch);
  }
  return traj;
}

std::vector<Trajectory> run_ensemble(const GraphSchedule& schedule, const SystemParams& params, Time horizon,
                                     int runs, const RecordingOptions& recording, unsigned threads) {
  if (runs < 1) throw std::invalid_argument("ensemble size must be >= 1");
  std::vector<Trajectory> out(static_cast<std::size_t>(runs));
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(runs));

  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](unsigned worker) {
    try {
      for (int r = static_cast<int>(worker); r < runs; r += static_cast<int>(threads)) {
        out[static_cast<std::size_t>(r)] =
            run_simulation(schedule, params, horizon, recording, static_cast<std::uint64_t>(r));
      }
    } catch (...) {
      errors[worker] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

EnsembleSummary summarize(const std::vector<Trajectory>& runs) {
  EnsembleSummary summary;
  if (runs.empty()) return summary;
  summary.runs = static_cast<int>(runs.size());
  const auto& first = runs.front().points;
  for (const auto& run : runs) {
    if (run.points.size() != first.size()) throw std::invalid_argument("runs recorded different times");
  }
  for (std::size_t k = 0; k < first.size(); ++k) {
    summary.times.push_back(first[k].t);
    Vector sum = Vector::Zero(first[k].means.size());
    for (const auto& run : runs) sum += run.points[k].means;
    const Vector mean = sum / static_cast<double>(runs.size());
    Vector sq = Vector::Zero(mean.size());
    for (const auto& run : runs) sq += (run.points[k].means - mean).cwiseAbs2();
    summary.mean.push_back(mean);
    summary.variance.push_back(runs.size() > 1 ? Vector(sq / static_cast<double>(runs.size() - 1))
                                               : Vector(Vector::Zero(mean.size())));
  }
  return summary;
}

}  // namespace lwr
