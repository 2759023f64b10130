#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lwr/belief_core.hpp"
#include "lwr/expected_process.hpp"
#include "lwr/graph_dynamics.hpp"

namespace lwr {

/// Maximum absolute row sum.
double norm_inf(const Matrix& m);
/// Maximum absolute entry. Not submultiplicative, but transpose-invariant.
double norm_max(const Matrix& m);

enum class CheckStatus { pass, fail, precondition_unmet };
std::string_view to_string(CheckStatus status);

/// One inequality lhs <= rhs evaluated numerically. pass iff margin >= -1e-12.
struct BoundCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  CheckStatus status = CheckStatus::pass;
  std::string note;

  bool passed() const { return status == CheckStatus::pass; }
  bool failed() const { return status == CheckStatus::fail; }
};

inline constexpr double kBoundTolerance = 1e-12;

BoundCheck make_check(std::string name, double lhs, double rhs);
BoundCheck gated_check(std::string name, std::string why);

// --- contraction bounds -----------------------------------------------------
//
// Each check comes in two flavours: one building what it needs from the
// schedule (convenient, O(horizon)), and one reading a TransitionCache that
// the suite shares across checkpoints.

/// (B_{s+kappa : s+l+1})_ii >= (P_s)_ii / (P_{s+kappa})_ii for every agent.
/// Reported as lhs = ratio, rhs = diagonal entry, for the tightest agent.
BoundCheck check_diagonal_bound(const TransitionCache& cache, Time s, Time l, Time kappa);
BoundCheck check_diagonal_bound(const GraphSchedule& schedule, const SystemParams& params, Time s, Time l,
                                Time kappa);

/// ||B_{s+kappa : s}||_inf <= 1 - min_i (P_s)_ii / (P_{s+kappa})_ii^2, gated on
/// every agent hearing the truth inside [s, s+kappa).
BoundCheck check_contraction(const TransitionCache& cache, Time s, Time kappa);
BoundCheck check_contraction(const GraphSchedule& schedule, const SystemParams& params, Time s, Time kappa);

/// m* = 2 d kappa / delta + tau0 / (d kappa tau), delta = min(tau0/tau, 1).
double product_decay_threshold(const SystemParams& params, Time kappa, int d);

/// ||B_{(m0+m)kappa : m0 kappa}||_inf <= exp(-(1/(2 d kappa)) sum_{j=2}^{m+1} 1/(m0+j)).
/// Gated on m0 >= m*, on every aligned kappa-window in [0, (m0+m)kappa)
/// containing a truth edge for each agent, and on max degree <= d.
BoundCheck check_product_decay(const TransitionCache& cache, const SystemParams& params, Time m0, Time m,
                               Time kappa, int d);
BoundCheck check_product_decay(const GraphSchedule& schedule, const SystemParams& params, Time m0, Time m,
                               Time kappa, int d);

// --- norm inequalities ------------------------------------------------------

/// Worst case over `pairs` random (R, S) with dimensions up to max_dim of
///   ||RS||_inf <= ||R||_inf ||S||_inf
///   ||RS||_max <= ||R||_inf ||S||_max
///   ||R S R^T||_max <= ||R||_inf^2 ||S||_max
std::vector<BoundCheck> check_norm_inequalities(int pairs, int max_dim, std::uint64_t seed);

// --- rate fitting -----------------------------------------------------------

struct FitWindow {
  Time lo = 1;
  Time hi = 0;
};

enum class RateVerdict { pass, fail, converged_before_window };
std::string_view to_string(RateVerdict verdict);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;  // log C
  FitWindow window;
  double theoretical_bound = 0.0;  // -1 / (2 d kappa)
  std::size_t points = 0;
  RateVerdict verdict = RateVerdict::fail;
};

inline constexpr double kRateSlack = 0.05;

/// Least squares of log(norm) on log(t) over recorded points with
/// lo <= t <= hi and norm > 0. Passes when slope <= bound + kRateSlack.
RateFit fit_rate(std::span<const Time> times, std::span<const double> norms, FitWindow window, Time kappa, int d);
RateFit fit_rate(const ExpectedTrajectory& trajectory, FitWindow window, Time kappa, int d);

/// Geometric grid lo, lo*10^{1/per_decade}, ..., hi (rounded, deduplicated).
std::vector<Time> geometric_grid(Time lo, Time hi, int per_decade);

// --- deviation moments ------------------------------------------------------

struct MomentReport {
  std::vector<Time> times;
  std::vector<Vector> fourth_moment;  // per time, per agent: mean over runs of Delta^4
  std::vector<double> max_moment;     // max over agents
  std::vector<double> partial_sums;   // running sum of max_moment over the grid
  std::optional<double> decay_exponent;  // only when runs >= 100 and moments positive
  int runs = 0;
};

/// samples[k][r] holds Delta_{t_k} (agents only) for run r. Each coordinate is
/// summed in sorted order so the estimate depends only on the multiset of runs.
MomentReport moments_from_samples(const std::vector<Time>& times, const std::vector<std::vector<Vector>>& samples);

MomentReport estimate_deviation_moments(const GraphSchedule& schedule, const SystemParams& params,
                                        const std::vector<Time>& times, int runs, unsigned threads = 0);

// --- verdicts ---------------------------------------------------------------

enum class CounterexampleStatus { pass, fail, insufficient_horizon };
std::string_view to_string(CounterexampleStatus status);

struct CounterexampleVerdict {
  CounterexampleStatus status = CounterexampleStatus::fail;
  int rounds_completed = 0;            // rounds with both t_k and s_k realized
  double min_value = 0.0;              // min over t of min(y_{t,1}, y_{t,2}), independent run
  bool switch_bounds_hold = false;     // y_{s_k,1} >= 1 + 2^{-2k+1}, y_{t_k,2} >= 1 + 2^{-2k}
  std::array<std::int64_t, 2> truth_edges{};  // per agent over the horizon
  std::vector<std::string> failures;
};

/// Re-runs the expected recursion on the constructed schedule (independently
/// of the construction's own co-run) and checks the lower bounds.
CounterexampleVerdict counterexample_check(const Counterexample& construction, const CounterexampleSetup& setup,
                                           std::int64_t min_truth_edges = 5);

enum class ConsensusCause { none, mean_not_converged, precision_below_floor, isolated_agent };
std::string_view to_string(ConsensusCause cause);

struct ConsensusVerdict {
  bool pass = false;
  ConsensusCause cause = ConsensusCause::none;
  int agent = 0;           // offending agent when !pass
  double max_error = 0.0;  // max_i |x_{T,i} - truth|
  double min_precision = 0.0;
};

/// Mean criterion at the final recorded time plus precisions past a floor. An
/// agent whose precision never grew is reported as isolated.
ConsensusVerdict consensus_verdict(const Trajectory& trajectory, double eps_mean, double precision_floor);

// --- suite ------------------------------------------------------------------

struct SuiteSelection {
  bool stochasticity = false;
  bool diagonal = false;
  bool contraction = false;
  bool product_decay = false;
  bool norms = false;

  static SuiteSelection all() { return {true, true, true, true, true}; }
  bool empty() const { return !(stochasticity || diagonal || contraction || product_decay || norms); }
};

struct SuiteHooks {
  // Fault injection: add `b_perturbation` to B_t(0, 0) at t = perturb_time.
  double b_perturbation = 0.0;
  Time perturb_time = 0;
};

/// Runs the selected checks over [0, horizon) of one schedule: stochasticity at
/// every step, diagonal and contraction bounds at every aligned window, and
/// product decay from m0 = ceil(m*) for every m that fits the horizon.
std::vector<BoundCheck> run_bound_suite(const GraphSchedule& schedule, const SystemParams& params, Time horizon,
                                        Time kappa, const SuiteSelection& selection, const SuiteHooks& hooks = {},
                                        std::uint64_t norm_seed = 0);

}  // namespace lwr
