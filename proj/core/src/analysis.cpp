#include "lwr/analysis.hpp"

#include "analysis_detail.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace lwr {

double norm_inf(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

double norm_max(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().maxCoeff();
}

std::string_view to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "FAIL";
    case CheckStatus::precondition_unmet: return "precondition-unmet";
  }
  return "?";
}

BoundCheck make_check(std::string name, double lhs, double rhs) {
  BoundCheck c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.margin = rhs - lhs;
  c.status = c.margin >= -kBoundTolerance ? CheckStatus::pass : CheckStatus::fail;
  return c;
}

BoundCheck gated_check(std::string name, std::string why) {
  BoundCheck c;
  c.name = std::move(name);
  c.status = CheckStatus::precondition_unmet;
  c.note = std::move(why);
  return c;
}

namespace {

std::string label(std::string_view base, std::initializer_list<std::pair<const char*, Time>> args) {
  std::ostringstream os;
  os << base;
  char sep = '(';
  for (const auto& [key, value] : args) {
    os << sep << key << '=' << value;
    sep = ',';
  }
  os << ')';
  return os.str();
}

void require_window(const TransitionCache& cache, Time end) {
  if (end > cache.horizon()) throw std::out_of_range("check window extends past the cached horizon");
}

bool window_hears_truth(const TransitionCache& cache, Time start, Time kappa) {
  for (int i = 1; i <= cache.agents(); ++i) {
    bool heard = false;
    for (Time t = start; t < start + kappa && !heard; ++t) heard = cache.graph(t).hears_truth(i);
    if (!heard) return false;
  }
  return true;
}

}  // namespace

BoundCheck check_diagonal_bound(const TransitionCache& cache, Time s, Time l, Time kappa) {
  if (kappa < 1 || l < 0 || l > kappa - 1) throw std::invalid_argument("diagonal bound needs 0 <= l <= kappa - 1");
  if (s < 0) throw std::invalid_argument("diagonal bound needs s >= 0");
  require_window(cache, s + kappa);
  const Matrix prod = cache.product(s + kappa, s + l + 1);
  const Vector& p_s = cache.p_diag(s);
  const Vector& p_end = cache.p_diag(s + kappa);
  double best_lhs = 0.0, best_rhs = 0.0, best_margin = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= cache.agents(); ++i) {
    const double ratio = p_s[i] / p_end[i];
    const double entry = prod(i - 1, i - 1);
    if (entry - ratio < best_margin) {
      best_margin = entry - ratio;
      best_lhs = ratio;
      best_rhs = entry;
    }
  }
  return make_check(label("diagonal", {{"s", s}, {"l", l}, {"kappa", kappa}}), best_lhs, best_rhs);
}

BoundCheck check_diagonal_bound(const GraphSchedule& schedule, const SystemParams& params, Time s, Time l,
                                Time kappa) {
  return check_diagonal_bound(TransitionCache(schedule, params.ratio(), s + kappa), s, l, kappa);
}

BoundCheck check_contraction(const TransitionCache& cache, Time s, Time kappa) {
  if (kappa < 1 || s < 0) throw std::invalid_argument("contraction check needs s >= 0 and kappa >= 1");
  require_window(cache, s + kappa);
  std::string name = label("contraction", {{"s", s}, {"kappa", kappa}});
  if (!window_hears_truth(cache, s, kappa)) {
    return gated_check(std::move(name), "some agent does not hear the truth in the window");
  }
  const Vector& p_s = cache.p_diag(s);
  const Vector& p_end = cache.p_diag(s + kappa);
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= cache.agents(); ++i) worst = std::min(worst, p_s[i] / (p_end[i] * p_end[i]));
  return make_check(std::move(name), norm_inf(cache.product(s + kappa, s)), 1.0 - worst);
}

BoundCheck check_contraction(const GraphSchedule& schedule, const SystemParams& params, Time s, Time kappa) {
  return check_contraction(TransitionCache(schedule, params.ratio(), s + kappa), s, kappa);
}

double product_decay_threshold(const SystemParams& params, Time kappa, int d) {
  if (d < 1 || kappa < 1) throw std::invalid_argument("product decay threshold needs d >= 1 and kappa >= 1");
  const double delta = std::min(params.ratio(), 1.0);
  const double dk = static_cast<double>(d) * static_cast<double>(kappa);
  return 2.0 * dk / delta + params.tau0 / (dk * params.tau);
}

namespace detail {

double product_decay_rhs(Time m0, Time m, Time kappa, int d) {
  double harmonic = 0.0;
  for (Time j = 2; j <= m + 1; ++j) harmonic += 1.0 / static_cast<double>(m0 + j);
  return std::exp(-harmonic / (2.0 * static_cast<double>(d) * static_cast<double>(kappa)));
}

// Preconditions only; std::nullopt when they hold.
std::optional<std::string> product_decay_gate(const TransitionCache& cache, const SystemParams& params, Time m0,
                                              Time m, Time kappa, int d) {
  const double m_star = product_decay_threshold(params, kappa, d);
  if (static_cast<double>(m0) < m_star) {
    std::ostringstream os;
    os << "requires m0 >= m* = " << m_star;
    return os.str();
  }
  const Time end = (m0 + m) * kappa;
  for (Time w = 0; w < end; w += kappa) {
    if (!window_hears_truth(cache, w, kappa)) {
      return "truth-hearing fails in window starting at " + std::to_string(w);
    }
  }
  for (Time t = 0; t < end; ++t) {
    const Graph& g = cache.graph(t);
    for (int i = 1; i <= g.agents(); ++i) {
      if (g.degree(i) > d) return "degree exceeds d at t=" + std::to_string(t);
    }
  }
  return std::nullopt;
}

}  // namespace detail

BoundCheck check_product_decay(const TransitionCache& cache, const SystemParams& params, Time m0, Time m,
                               Time kappa, int d) {
  if (m0 < 1 || m < 0 || kappa < 1 || d < 1) throw std::invalid_argument("product decay check: bad arguments");
  const Time end = (m0 + m) * kappa;
  require_window(cache, end);
  std::string name = label("product_decay", {{"m0", m0}, {"m", m}, {"kappa", kappa}, {"d", d}});
  if (auto why = detail::product_decay_gate(cache, params, m0, m, kappa, d)) return gated_check(std::move(name), *why);
  return make_check(std::move(name), norm_inf(cache.product(end, m0 * kappa)),
                    detail::product_decay_rhs(m0, m, kappa, d));
}

BoundCheck check_product_decay(const GraphSchedule& schedule, const SystemParams& params, Time m0, Time m,
                               Time kappa, int d) {
  return check_product_decay(TransitionCache(schedule, params.ratio(), (m0 + m) * kappa), params, m0, m, kappa, d);
}

// --- rate fitting -----------------------------------------------------------

std::string_view to_string(RateVerdict verdict) {
  switch (verdict) {
    case RateVerdict::pass: return "pass";
    case RateVerdict::fail: return "FAIL";
    case RateVerdict::converged_before_window: return "converged-before-window";
  }
  return "?";
}

namespace {

struct LineFit {
  double slope;
  double intercept;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

}  // namespace

RateFit fit_rate(std::span<const Time> times, std::span<const double> norms, FitWindow window, Time kappa, int d) {
  if (times.size() != norms.size()) throw std::invalid_argument("fit_rate: times/norms length mismatch");
  if (window.lo < 1 || window.hi < window.lo) throw std::invalid_argument("fit_rate: window needs 1 <= lo <= hi");
  if (kappa < 1 || d < 1) throw std::invalid_argument("fit_rate: need kappa >= 1 and d >= 1");

  RateFit fit;
  fit.window = window;
  fit.theoretical_bound = -1.0 / (2.0 * static_cast<double>(d) * static_cast<double>(kappa));

  std::vector<double> lx, ly;
  std::size_t in_window = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < window.lo || times[k] > window.hi) continue;
    ++in_window;
    if (norms[k] > 0.0) {
      lx.push_back(std::log(static_cast<double>(times[k])));
      ly.push_back(std::log(norms[k]));
    }
  }
  if (in_window == 0) throw std::invalid_argument("fit_rate: no recorded times inside the window");
  fit.points = lx.size();
  if (lx.size() < 2) {
    fit.verdict = RateVerdict::converged_before_window;
    return fit;
  }
  const LineFit line = least_squares(lx, ly);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.verdict = fit.slope <= fit.theoretical_bound + kRateSlack ? RateVerdict::pass : RateVerdict::fail;
  return fit;
}

RateFit fit_rate(const ExpectedTrajectory& trajectory, FitWindow window, Time kappa, int d) {
  return fit_rate(trajectory.times, trajectory.norms, window, kappa, d);
}

std::vector<Time> geometric_grid(Time lo, Time hi, int per_decade) {
  if (lo < 1 || hi < lo || per_decade < 1) throw std::invalid_argument("geometric_grid: bad arguments");
  std::vector<Time> grid;
  for (int k = 0;; ++k) {
    const double v = static_cast<double>(lo) * std::pow(10.0, static_cast<double>(k) / per_decade);
    const auto t = static_cast<Time>(std::llround(v));
    if (t > hi) break;
    if (grid.empty() || grid.back() != t) grid.push_back(t);
  }
  return grid;
}

// --- deviation moments ------------------------------------------------------

MomentReport moments_from_samples(const std::vector<Time>& times, const std::vector<std::vector<Vector>>& samples) {
  if (times.size() != samples.size()) throw std::invalid_argument("moments: times/samples mismatch");
  MomentReport report;
  report.times = times;
  report.runs = samples.empty() ? 0 : static_cast<int>(samples.front().size());
  double running = 0.0;
  std::vector<double> column;
  for (const auto& runs : samples) {
    if (static_cast<int>(runs.size()) != report.runs || runs.empty()) {
      throw std::invalid_argument("moments: every time needs the same positive number of runs");
    }
    const Eigen::Index n = runs.front().size();
    Vector moment(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      column.clear();
      for (const Vector& delta : runs) column.push_back(std::pow(delta[i], 4));
      std::sort(column.begin(), column.end());
      double sum = 0.0;
      for (double v : column) sum += v;
      moment[i] = sum / static_cast<double>(column.size());
    }
    const double mx = n ? moment.maxCoeff() : 0.0;
    report.fourth_moment.push_back(std::move(moment));
    report.max_moment.push_back(mx);
    running += mx;
    report.partial_sums.push_back(running);
  }

  if (report.runs >= 100) {
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (times[k] > 0 && report.max_moment[k] > 0.0) {
        lx.push_back(std::log(static_cast<double>(times[k])));
        ly.push_back(std::log(report.max_moment[k]));
      }
    }
    if (lx.size() >= 2) report.decay_exponent = least_squares(lx, ly).slope;
  }
  return report;
}

MomentReport estimate_deviation_moments(const GraphSchedule& schedule, const SystemParams& params,
                                        const std::vector<Time>& times, int runs, unsigned threads) {
  if (times.empty()) throw std::invalid_argument("deviation moments need at least one time");
  if (runs < 1) throw std::invalid_argument("deviation moments need runs >= 1");
  std::vector<Time> grid = times;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const Time horizon = grid.back();

  const ExpectedTrajectory expected = run_expected(schedule, params, horizon, {0, grid});
  std::map<Time, const Vector*> z_at;
  for (std::size_t k = 0; k < expected.times.size(); ++k) z_at[expected.times[k]] = &expected.z[k];

  const std::vector<Trajectory> ensemble = run_ensemble(schedule, params, horizon, runs, {0, grid, false}, threads);

  std::vector<std::vector<Vector>> samples(grid.size());
  for (const Trajectory& traj : ensemble) {
    std::size_t k = 0;
    for (const TrajectoryPoint& point : traj.points) {
      if (k < grid.size() && point.t == grid[k]) {
        const Eigen::Index n = point.means.size() - 1;
        Vector delta = (point.means.tail(n).array() - params.truth).matrix() - *z_at.at(point.t);
        samples[k].push_back(std::move(delta));
        ++k;
      }
    }
  }
  return moments_from_samples(grid, samples);
}

// --- verdicts ---------------------------------------------------------------

std::string_view to_string(CounterexampleStatus status) {
  switch (status) {
    case CounterexampleStatus::pass: return "pass";
    case CounterexampleStatus::fail: return "FAIL";
    case CounterexampleStatus::insufficient_horizon: return "insufficient-horizon";
  }
  return "?";
}

CounterexampleVerdict counterexample_check(const Counterexample& construction, const CounterexampleSetup& setup,
                                           std::int64_t min_truth_edges) {
  CounterexampleVerdict verdict;
  const Time horizon = setup.horizon;
  for (const auto& round : construction.rounds) {
    if (round.s_k) ++verdict.rounds_completed;
  }
  if (verdict.rounds_completed == 0) {
    verdict.status = CounterexampleStatus::insufficient_horizon;
    verdict.failures.push_back("no complete switching round before the horizon");
    return verdict;
  }

  SystemParams params;
  params.n = 2;
  params.tau = 1.0;
  params.tau0 = setup.precision_ratio;
  params.truth = 0.0;
  params.initial_means = {setup.initial_agent1, setup.initial_agent2};

  std::map<Time, std::pair<double, double>> at;
  for (const auto& round : construction.rounds) {
    at[round.t_k] = {};
    if (round.s_k) at[*round.s_k] = {};
  }
  double min_value = std::numeric_limits<double>::infinity();
  std::array<std::int64_t, 2> truth_edges{};
  for_each_expected(construction.schedule, params, horizon, [&](Time t, const Vector& z, const PrecisionLedger&) {
    min_value = std::min({min_value, z[0], z[1]});
    if (auto it = at.find(t); it != at.end()) it->second = {z[0], z[1]};
    if (t < horizon) {
      const Graph g = construction.schedule.graph_at(t);
      truth_edges[0] += g.hears_truth(1);
      truth_edges[1] += g.hears_truth(2);
    }
  });
  verdict.min_value = min_value;
  verdict.truth_edges = truth_edges;

  if (min_value < 1.0 - kBoundTolerance) {
    verdict.failures.push_back("expected mean dropped below 1: " + std::to_string(min_value));
  }

  verdict.switch_bounds_hold = true;
  Time previous = -1;
  for (const auto& round : construction.rounds) {
    const int k = round.k;
    const double y_tk2 = at[round.t_k].second;
    if (y_tk2 < 1.0 + std::ldexp(1.0, -2 * k) - kBoundTolerance) {
      verdict.switch_bounds_hold = false;
      verdict.failures.push_back("round " + std::to_string(k) + ": y_{t_k,2} below 1 + 2^{-2k}");
    }
    if (round.t_k <= previous) verdict.failures.push_back("switch times not strictly increasing");
    previous = round.t_k;
    if (round.s_k) {
      const double y_sk1 = at[*round.s_k].first;
      if (y_sk1 < 1.0 + std::ldexp(1.0, -2 * k + 1) - kBoundTolerance) {
        verdict.switch_bounds_hold = false;
        verdict.failures.push_back("round " + std::to_string(k) + ": y_{s_k,1} below 1 + 2^{-2k+1}");
      }
      if (*round.s_k <= previous) verdict.failures.push_back("switch times not strictly increasing");
      previous = *round.s_k;
    }
  }

  for (int a = 0; a < 2; ++a) {
    if (truth_edges[static_cast<std::size_t>(a)] < min_truth_edges) {
      verdict.failures.push_back("agent " + std::to_string(a + 1) + " heard the truth only " +
                                 std::to_string(truth_edges[static_cast<std::size_t>(a)]) + " times");
    }
  }
  verdict.status = verdict.failures.empty() ? CounterexampleStatus::pass : CounterexampleStatus::fail;
  return verdict;
}

std::string_view to_string(ConsensusCause cause) {
  switch (cause) {
    case ConsensusCause::none: return "none";
    case ConsensusCause::mean_not_converged: return "mean not converged";
    case ConsensusCause::precision_below_floor: return "precision below floor";
    case ConsensusCause::isolated_agent: return "isolated agent";
  }
  return "?";
}

ConsensusVerdict consensus_verdict(const Trajectory& trajectory, double eps_mean, double precision_floor) {
  if (trajectory.points.empty()) throw std::invalid_argument("consensus verdict needs a non-empty trajectory");
  const TrajectoryPoint& first = trajectory.points.front();
  const TrajectoryPoint& last = trajectory.final();
  const int n = static_cast<int>(last.means.size()) - 1;

  ConsensusVerdict v;
  v.min_precision = std::numeric_limits<double>::infinity();
  int worst_mean_agent = 0;
  for (int i = 1; i <= n; ++i) {
    const double err = std::abs(last.means[i] - trajectory.truth);
    if (err > v.max_error) {
      v.max_error = err;
      worst_mean_agent = i;
    }
    v.min_precision = std::min(v.min_precision, last.precisions[i]);
  }
  for (int i = 1; i <= n; ++i) {
    if (last.t > first.t && last.precisions[i] == first.precisions[i]) {
      v.cause = ConsensusCause::isolated_agent;
      v.agent = i;
      return v;
    }
  }
  for (int i = 1; i <= n; ++i) {
    if (last.precisions[i] < precision_floor) {
      v.cause = ConsensusCause::precision_below_floor;
      v.agent = i;
      return v;
    }
  }
  if (v.max_error > eps_mean) {
    v.cause = ConsensusCause::mean_not_converged;
    v.agent = worst_mean_agent;
    return v;
  }
  v.pass = true;
  return v;
}

}  // namespace lwr
