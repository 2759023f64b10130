#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "format.hpp"
#include "lwr/analysis.hpp"
#include "lwr/expected_process.hpp"

namespace lwr::cli {
namespace {

using nlohmann::ordered_json;

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot write '" + path.string() + "'");
  return os;
}

void write_json(const std::filesystem::path& path, const ordered_json& doc) {
  auto os = open_output(path);
  os << doc.dump(2) << "\n";
}

std::ostream& log_of(const CommandContext& ctx) {
  static std::ostringstream sink;
  return ctx.log ? *ctx.log : sink;
}

std::string run_file_name(int run) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trajectory_%04d.csv", run);
  return buf;
}

void write_expected(const std::filesystem::path& dir, const ExpectedTrajectory& traj) {
  auto os = open_output(dir / "expected.csv");
  os << "# kind=expected\n";
  os << "t,agent,y\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    for (Eigen::Index i = 0; i < traj.z[k].size(); ++i) {
      os << traj.times[k] << "," << i + 1 << "," << format_double(traj.truth + traj.z[k][i]) << "\n";
    }
  }
  auto ns = open_output(dir / "expected_norms.csv");
  ns << "# kind=expected_norms\n";
  ns << "t,norm_inf\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    ns << traj.times[k] << "," << format_double(traj.norms[k]) << "\n";
  }
}

ExpectedRecordPlan record_plan(const ExperimentConfig& c) {
  ExpectedRecordPlan plan;
  plan.every = c.record_every;
  return plan;
}

int degree_bound(const ExperimentConfig& c, const GraphSchedule& schedule) {
  if (c.analysis.d) return *c.analysis.d;
  return std::max(1, max_degree(schedule, std::max<Time>(c.horizon, 1)));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

// Reads a CSV written by this tool: '#' lines skipped, header checked.
std::vector<std::vector<std::string>> read_table(const std::filesystem::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw InputError("missing input file '" + path.string() + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!seen_header) {
      if (line != header) throw InputError(path.string() + ": expected header '" + header + "'");
      seen_header = true;
      continue;
    }
    rows.push_back(split_csv(line));
  }
  if (!seen_header) throw InputError(path.string() + ": empty table");
  return rows;
}

double cell_double(const std::vector<std::string>& row, std::size_t k, const std::filesystem::path& path) {
  if (k >= row.size()) throw InputError(path.string() + ": short row");
  auto v = parse_double(row[k]);
  if (!v) throw InputError(path.string() + ": bad number '" + row[k] + "'");
  return *v;
}

Time cell_time(const std::vector<std::string>& row, std::size_t k, const std::filesystem::path& path) {
  if (k >= row.size()) throw InputError(path.string() + ": short row");
  auto v = parse_int<Time>(row[k]);
  if (!v) throw InputError(path.string() + ": bad time '" + row[k] + "'");
  return *v;
}

}  // namespace

int cmd_simulate(const CommandContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const GraphSchedule schedule = build_schedule(c);
  SystemParams params = c.params;
  params.seed = *c.seed;

  RecordingOptions rec;
  rec.every = c.record_every;
  const auto runs = run_ensemble(schedule, params, c.horizon, c.ensemble, rec);

  for (int r = 0; r < c.ensemble; ++r) {
    auto os = open_output(ctx.out_dir / run_file_name(r));
    os << "# kind=trajectory run=" << r << "\n";
    os << "t,agent,mean,precision\n";
    for (const auto& p : runs[static_cast<std::size_t>(r)].points) {
      for (Eigen::Index i = 1; i < p.means.size(); ++i) {
        os << p.t << "," << i << "," << format_double(p.means[i]) << "," << format_double(p.precisions[i]) << "\n";
      }
    }
  }

  const EnsembleSummary summary = summarize(runs);
  auto os = open_output(ctx.out_dir / "summary.csv");
  os << "# kind=summary runs=" << summary.runs << " truth=" << format_double(params.truth) << "\n";
  os << "t,agent,mean,variance\n";
  for (std::size_t k = 0; k < summary.times.size(); ++k) {
    for (Eigen::Index i = 1; i < summary.mean[k].size(); ++i) {
      os << summary.times[k] << "," << i << "," << format_double(summary.mean[k][i]) << ","
         << format_double(summary.variance[k][i]) << "\n";
    }
  }
  log_of(ctx) << "simulate: " << c.ensemble << " run(s), horizon " << c.horizon << " -> " << ctx.out_dir.string()
              << "\n";
  return kOk;
}

int cmd_expected(const CommandContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  if (c.ensemble > 1) log_of(ctx) << "warning: expected is deterministic; ensemble size " << c.ensemble << " ignored\n";
  const GraphSchedule schedule = build_schedule(c);
  const ExpectedTrajectory traj = run_expected(schedule, c.params, c.horizon, record_plan(c));
  write_expected(ctx.out_dir, traj);
  log_of(ctx) << "expected: horizon " << c.horizon << ", final norm " << format_double(traj.norms.back()) << "\n";
  return kOk;
}

int cmd_verify(const CommandContext& ctx, const SuiteHooks& hooks) {
  const ExperimentConfig& c = ctx.config;
  const GraphSchedule schedule = build_schedule(c);
  const auto checks = run_bound_suite(schedule, c.params, c.horizon, c.schedule.kappa, c.analysis.checks, hooks,
                                      *c.seed);

  auto os = open_output(ctx.out_dir / "report.txt");
  os << "# name lhs rhs margin status note\n";
  int passed = 0, failed = 0, gated = 0;
  ordered_json failures = ordered_json::array();
  for (const auto& chk : checks) {
    os << chk.name << " " << format_double(chk.lhs) << " " << format_double(chk.rhs) << " "
       << format_double(chk.margin) << " " << to_string(chk.status);
    if (!chk.note.empty()) os << " " << chk.note;
    os << "\n";
    switch (chk.status) {
      case CheckStatus::pass: ++passed; break;
      case CheckStatus::fail:
        ++failed;
        failures.push_back(chk.name);
        break;
      case CheckStatus::precondition_unmet: ++gated; break;
    }
  }

  ordered_json doc;
  doc["checks"] = checks.size();
  doc["passed"] = passed;
  doc["failed"] = failed;
  doc["precondition_unmet"] = gated;
  doc["failures"] = failures;
  doc["kappa"] = c.schedule.kappa;
  doc["horizon"] = c.horizon;
  if (c.horizon >= c.schedule.kappa) {
    const auto th = verify_truth_hearing(schedule, c.schedule.kappa, c.horizon);
    doc["truth_hearing"] = th.pass ? ordered_json("pass") : ordered_json("fail");
  }
  doc["verdict"] = failed == 0 ? "pass" : "FAIL";
  write_json(ctx.out_dir / "summary.json", doc);

  log_of(ctx) << "verify: " << passed << " pass, " << failed << " fail, " << gated << " precondition-unmet\n";
  return failed == 0 ? kOk : kCheckFailed;
}

int cmd_counterexample(const CommandContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  CounterexampleSetup setup;
  setup.precision_ratio = c.params.ratio();
  setup.initial_agent1 = c.params.initial_mean(1) - c.params.truth;
  setup.initial_agent2 = c.params.initial_mean(2) - c.params.truth;
  setup.horizon = c.horizon;
  setup.rule.threshold_offset = c.schedule.threshold_offset;

  const Counterexample ce = make_counterexample_schedule(setup);
  const CounterexampleVerdict verdict = counterexample_check(ce, setup);

  {
    auto os = open_output(ctx.out_dir / "switch_times.csv");
    os << "# kind=switch_times\n";
    os << "k,t_k,s_k,y_tk_agent2,y_sk_agent1\n";
    for (const auto& r : ce.rounds) {
      os << r.k << "," << r.t_k << "," << (r.s_k ? std::to_string(*r.s_k) : std::string()) << ","
         << format_double(c.params.truth + r.y_tk_agent2) << ","
         << (r.y_sk_agent1 ? format_double(c.params.truth + *r.y_sk_agent1) : std::string()) << "\n";
    }
  }
  write_expected(ctx.out_dir, run_expected(ce.schedule, c.params, c.horizon, record_plan(c)));

  auto os = open_output(ctx.out_dir / "verdict.txt");
  os << "status " << to_string(verdict.status) << "\n";
  os << "rounds_completed " << verdict.rounds_completed << "\n";
  if (verdict.status != CounterexampleStatus::insufficient_horizon) {
    os << "min_value " << format_double(c.params.truth + verdict.min_value) << "\n";
    os << "switch_bounds " << (verdict.switch_bounds_hold ? "hold" : "violated") << "\n";
    os << "truth_edges_agent1 " << verdict.truth_edges[0] << "\n";
    os << "truth_edges_agent2 " << verdict.truth_edges[1] << "\n";
  }
  for (Time kappa : {Time{10}, Time{100}, Time{1000}}) {
    if (kappa > c.horizon) continue;
    const auto th = verify_truth_hearing(ce.schedule, kappa, c.horizon);
    os << "truth_hearing(kappa=" << kappa << ") " << (th.pass ? "pass" : "fail");
    if (!th.pass) os << " agent " << th.agent << " window " << th.window_start;
    os << "\n";
  }
  for (const auto& f : verdict.failures) os << "failure " << f << "\n";

  log_of(ctx) << "counterexample: " << to_string(verdict.status) << ", " << verdict.rounds_completed
              << " complete round(s)\n";
  switch (verdict.status) {
    case CounterexampleStatus::pass: return kOk;
    case CounterexampleStatus::fail: return kCheckFailed;
    case CounterexampleStatus::insufficient_horizon: return kConfigError;
  }
  return kCheckFailed;
}

int cmd_ratefit(const CommandContext& ctx, const std::filesystem::path& input_dir) {
  const ExperimentConfig& c = ctx.config;
  std::vector<Time> times;
  std::vector<double> norms;
  if (c.analysis.fit_source == "expected") {
    const auto path = input_dir / "expected_norms.csv";
    for (const auto& row : read_table(path, "t,norm_inf")) {
      times.push_back(cell_time(row, 0, path));
      norms.push_back(cell_double(row, 1, path));
    }
  } else {
    // Norm of the ensemble-mean error, max over agents.
    const auto path = input_dir / "summary.csv";
    std::map<Time, double> worst;
    for (const auto& row : read_table(path, "t,agent,mean,variance")) {
      const Time t = cell_time(row, 0, path);
      const double err = std::abs(cell_double(row, 2, path) - c.params.truth);
      auto [it, fresh] = worst.emplace(t, err);
      if (!fresh) it->second = std::max(it->second, err);
    }
    for (const auto& [t, v] : worst) {
      times.push_back(t);
      norms.push_back(v);
    }
  }

  const GraphSchedule schedule = build_schedule(c);
  const int d = degree_bound(c, schedule);
  const FitWindow window{c.analysis.fit_lo, c.analysis.fit_hi.value_or(std::max<Time>(c.horizon, 1))};
  RateFit fit;
  try {
    fit = fit_rate(times, norms, window, c.schedule.kappa, d);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }

  {
    auto os = open_output(ctx.out_dir / "rate_table.csv");
    os << "# kind=rate_table source=" << c.analysis.fit_source << "\n";
    os << "t,norm\n";
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (times[k] < window.lo || times[k] > window.hi) continue;
      os << times[k] << "," << format_double(norms[k]) << "\n";
    }
  }
  {
    auto os = open_output(ctx.out_dir / "rate.txt");
    os << "slope " << format_double(fit.slope) << "\n";
    os << "intercept " << format_double(fit.intercept) << "\n";
    os << "window " << window.lo << " " << window.hi << "\n";
    os << "kappa " << c.schedule.kappa << "\n";
    os << "d " << d << "\n";
    os << "theoretical_bound " << format_double(fit.theoretical_bound) << "\n";
    os << "slack " << format_double(kRateSlack) << "\n";
    os << "points " << fit.points << "\n";
    os << "verdict " << to_string(fit.verdict) << "\n";
  }
  ordered_json doc;
  doc["slope"] = fit.slope;
  doc["intercept"] = fit.intercept;
  doc["window"] = {window.lo, window.hi};
  doc["kappa"] = c.schedule.kappa;
  doc["d"] = d;
  doc["theoretical_bound"] = fit.theoretical_bound;
  doc["slack"] = kRateSlack;
  doc["points"] = fit.points;
  doc["verdict"] = to_string(fit.verdict);
  write_json(ctx.out_dir / "rate.json", doc);

  log_of(ctx) << "ratefit: slope " << format_double(fit.slope) << " vs bound " << format_double(fit.theoretical_bound)
              << " -> " << to_string(fit.verdict) << "\n";
  return fit.verdict == RateVerdict::fail ? kCheckFailed : kOk;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Experiments on social learning with a truth agent over time-varying graphs", "lwr"};
  app.require_subcommand(1);

  struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<Time> horizon;
  } common;
  double perturb_b = 0.0;
  Time perturb_time = 0;
  std::optional<std::string> input;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Experiment config file")->required();
    sub->add_option("--seed", common.seed, "Master seed (overrides the config)");
    sub->add_option("--out", common.out, "Output directory (overrides the config)");
    sub->add_option("--horizon", common.horizon, "Horizon (overrides the config)");
  };
  auto* simulate = app.add_subcommand("simulate", "Noisy mean process: per-run trajectories and ensemble summary");
  auto* expected = app.add_subcommand("expected", "Deterministic expected mean process");
  auto* verify = app.add_subcommand("verify", "Bound-check suite with a pass/fail report");
  auto* counter = app.add_subcommand("counterexample", "Two-agent schedule that avoids truthful consensus");
  auto* ratefit = app.add_subcommand("ratefit", "Log-log convergence-rate fit");
  for (auto* sub : {simulate, expected, verify, counter, ratefit}) add_common(sub);
  verify->add_option("--perturb-b", perturb_b, "Test hook: add this to B_t(0,0)");
  verify->add_option("--perturb-time", perturb_time, "Test hook: step at which to perturb");
  ratefit->add_option("--input", input, "Directory holding the trajectory tables (defaults to the output)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    CommandContext ctx;
    ctx.config = load_config(common.config);
    if (common.seed) ctx.config.seed = *common.seed;
    if (common.out) ctx.config.output = *common.out;
    if (common.horizon) ctx.config.horizon = *common.horizon;
    validate(ctx.config);
    ctx.out_dir = ctx.config.output;
    ctx.log = &out;
    std::filesystem::create_directories(ctx.out_dir);

    if (simulate->parsed()) return cmd_simulate(ctx);
    if (expected->parsed()) return cmd_expected(ctx);
    if (verify->parsed()) return cmd_verify(ctx, SuiteHooks{perturb_b, perturb_time});
    if (counter->parsed()) return cmd_counterexample(ctx);
    if (ratefit->parsed()) return cmd_ratefit(ctx, input ? std::filesystem::path(*input) : ctx.out_dir);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConstructionError& e) {
    err << "construction error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace lwr::cli
