#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "format.hpp"
#include "lwr/rng.hpp"

namespace lwr::cli {

ConfigError::ConfigError(int line, std::string field, const std::string& message)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
                         (field.empty() ? std::string() : field + ": ") + message),
      line_(line),
      field_(std::move(field)) {}

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::empty: return "empty";
    case ScheduleKind::periodic: return "periodic";
    case ScheduleKind::random: return "random";
    case ScheduleKind::counterexample: return "counterexample";
    case ScheduleKind::explicit_table: return "explicit-table";
  }
  return "periodic";
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return params == o.params && schedule == o.schedule && horizon == o.horizon && ensemble == o.ensemble &&
         record_every == o.record_every && seed == o.seed && output == o.output && analysis == o.analysis;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

struct Entry {
  std::string value;
  int line;
};

class Reader {
 public:
  Reader(std::string section, std::string key, const Entry& e)
      : field_(std::move(section) + "." + std::move(key)), e_(e) {}

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(e_.line, field_, msg); }

  double real() const {
    auto v = parse_double(e_.value);
    if (!v) fail("expected a number, got '" + e_.value + "'");
    return *v;
  }
  template <class Int>
  Int integer() const {
    auto v = parse_int<Int>(e_.value);
    if (!v) fail("expected an integer, got '" + e_.value + "'");
    return *v;
  }
  bool flag() const {
    if (e_.value == "on" || e_.value == "true" || e_.value == "1") return true;
    if (e_.value == "off" || e_.value == "false" || e_.value == "0") return false;
    fail("expected on/off, got '" + e_.value + "'");
  }
  const std::string& text() const { return e_.value; }

 private:
  std::string field_;
  const Entry& e_;
};

using Section = std::map<std::string, Entry>;
using Handler = std::function<void(const Reader&)>;

void apply(const std::string& section, Section& entries, const std::map<std::string, Handler>& handlers) {
  for (const auto& [key, entry] : entries) {
    auto it = handlers.find(key);
    if (it == handlers.end()) throw ConfigError(entry.line, section + "." + key, "unknown key");
    it->second(Reader(section, key, entry));
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  std::map<std::string, Section> sections;
  std::map<std::string, int> section_lines;
  std::string current;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "", "malformed section header '" + line + "'");
      current = trim(std::string_view(line).substr(1, line.size() - 2));
      if (current != "params" && current != "schedule" && current != "run" && current != "analysis") {
        throw ConfigError(line_no, current, "unknown section");
      }
      if (section_lines.count(current)) throw ConfigError(line_no, current, "section repeated");
      section_lines[current] = line_no;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "", "expected 'key = value'");
    if (current.empty()) throw ConfigError(line_no, "", "key outside of any section");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(line_no, current, "empty key");
    if (!sections[current].emplace(key, Entry{value, line_no}).second) {
      throw ConfigError(line_no, current + "." + key, "key repeated");
    }
  }

  ExperimentConfig c;
  c.base_dir = base_dir;
  c.params.initial_means.clear();
  bool have_means = false;

  apply("params", sections["params"],
        {
            {"n", [&](const Reader& r) { c.params.n = r.integer<int>(); }},
            {"tau", [&](const Reader& r) { c.params.tau = r.real(); }},
            {"tau0", [&](const Reader& r) { c.params.tau0 = r.real(); }},
            {"truth", [&](const Reader& r) { c.params.truth = r.real(); }},
            {"truth_noise", [&](const Reader& r) { c.params.truth_noise = r.flag(); }},
            {"zero_noise", [&](const Reader& r) { c.params.zero_noise = r.flag(); }},
            {"initial_means",
             [&](const Reader& r) {
               for (const auto& part : split(r.text(), ',')) {
                 auto v = parse_double(part);
                 if (!v) r.fail("expected comma-separated numbers, got '" + part + "'");
                 c.params.initial_means.push_back(*v);
               }
               have_means = true;
             }},
        });
  if (!have_means) c.params.initial_means = {1.0};

  bool have_kind = false;
  apply("schedule", sections["schedule"],
        {
            {"kind",
             [&](const Reader& r) {
               have_kind = true;
               const auto& k = r.text();
               if (k == "periodic") c.schedule.kind = ScheduleKind::periodic;
               else if (k == "random") c.schedule.kind = ScheduleKind::random;
               else if (k == "counterexample") c.schedule.kind = ScheduleKind::counterexample;
               else if (k == "explicit-table") c.schedule.kind = ScheduleKind::explicit_table;
               else if (k == "empty") c.schedule.kind = ScheduleKind::empty;
               else r.fail("unknown schedule kind '" + k + "'");
             }},
            {"kappa", [&](const Reader& r) { c.schedule.kappa = r.integer<Time>(); }},
            {"peer_rule",
             [&](const Reader& r) {
               try {
                 c.schedule.peer_rule = parse_peer_rule(r.text());
               } catch (const std::invalid_argument& e) {
                 r.fail(e.what());
               }
             }},
            {"peer_edges",
             [&](const Reader& r) {
               for (const auto& part : split(r.text(), ',')) {
                 const auto ends = split(part, '-');
                 std::optional<int> i, j;
                 if (ends.size() == 2) {
                   i = parse_int<int>(ends[0]);
                   j = parse_int<int>(ends[1]);
                 }
                 if (!i || !j) r.fail("expected receiver-source pairs like '1-2', got '" + part + "'");
                 c.schedule.peer_edges.emplace_back(*i, *j);
               }
             }},
            {"edge_probability", [&](const Reader& r) { c.schedule.edge_probability = r.real(); }},
            {"table", [&](const Reader& r) { c.schedule.table = r.text(); }},
            {"horizon_hint", [&](const Reader& r) { c.schedule.horizon_hint = r.integer<Time>(); }},
            {"threshold_offset", [&](const Reader& r) { c.schedule.threshold_offset = r.integer<int>(); }},
        });
  if (!have_kind) throw ConfigError(section_lines.count("schedule") ? section_lines["schedule"] : 0, "schedule.kind",
                                    "missing");

  apply("run", sections["run"],
        {
            {"horizon", [&](const Reader& r) { c.horizon = r.integer<Time>(); }},
            {"ensemble", [&](const Reader& r) { c.ensemble = r.integer<int>(); }},
            {"record_every", [&](const Reader& r) { c.record_every = r.integer<Time>(); }},
            {"seed", [&](const Reader& r) { c.seed = r.integer<std::uint64_t>(); }},
            {"output", [&](const Reader& r) { c.output = r.text(); }},
        });

  apply("analysis", sections["analysis"],
        {
            {"checks",
             [&](const Reader& r) {
               c.analysis.checks = {};
               if (r.text().empty() || r.text() == "none") return;
               for (const auto& name : split(r.text(), ',')) {
                 if (name == "stochasticity") c.analysis.checks.stochasticity = true;
                 else if (name == "diagonal") c.analysis.checks.diagonal = true;
                 else if (name == "contraction") c.analysis.checks.contraction = true;
                 else if (name == "product_decay") c.analysis.checks.product_decay = true;
                 else if (name == "norms") c.analysis.checks.norms = true;
                 else if (name == "all") c.analysis.checks = SuiteSelection::all();
                 else r.fail("unknown check '" + name + "'");
               }
             }},
            {"fit_lo", [&](const Reader& r) { c.analysis.fit_lo = r.integer<Time>(); }},
            {"fit_hi", [&](const Reader& r) { c.analysis.fit_hi = r.integer<Time>(); }},
            {"d", [&](const Reader& r) { c.analysis.d = r.integer<int>(); }},
            {"fit_source",
             [&](const Reader& r) {
               if (r.text() != "expected" && r.text() != "summary") r.fail("expected 'expected' or 'summary'");
               c.analysis.fit_source = r.text();
             }},
        });
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "", "cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  auto onoff = [](bool b) { return b ? "on" : "off"; };
  os << "[params]\n";
  os << "n = " << c.params.n << "\n";
  os << "tau = " << format_double(c.params.tau) << "\n";
  os << "tau0 = " << format_double(c.params.tau0) << "\n";
  os << "truth = " << format_double(c.params.truth) << "\n";
  os << "initial_means = ";
  for (std::size_t i = 0; i < c.params.initial_means.size(); ++i) {
    os << (i ? ", " : "") << format_double(c.params.initial_means[i]);
  }
  os << "\n";
  os << "truth_noise = " << onoff(c.params.truth_noise) << "\n";
  os << "zero_noise = " << onoff(c.params.zero_noise) << "\n";

  os << "\n[schedule]\n";
  os << "kind = " << to_string(c.schedule.kind) << "\n";
  os << "kappa = " << c.schedule.kappa << "\n";
  os << "peer_rule = " << to_string(c.schedule.peer_rule) << "\n";
  if (!c.schedule.peer_edges.empty()) {
    os << "peer_edges = ";
    for (std::size_t k = 0; k < c.schedule.peer_edges.size(); ++k) {
      os << (k ? ", " : "") << c.schedule.peer_edges[k].first << "-" << c.schedule.peer_edges[k].second;
    }
    os << "\n";
  }
  os << "edge_probability = " << format_double(c.schedule.edge_probability) << "\n";
  if (!c.schedule.table.empty()) os << "table = " << c.schedule.table << "\n";
  if (c.schedule.horizon_hint) os << "horizon_hint = " << *c.schedule.horizon_hint << "\n";
  os << "threshold_offset = " << c.schedule.threshold_offset << "\n";

  os << "\n[run]\n";
  os << "horizon = " << c.horizon << "\n";
  os << "ensemble = " << c.ensemble << "\n";
  os << "record_every = " << c.record_every << "\n";
  if (c.seed) os << "seed = " << *c.seed << "\n";
  os << "output = " << c.output << "\n";

  os << "\n[analysis]\n";
  std::vector<std::string> checks;
  if (c.analysis.checks.stochasticity) checks.emplace_back("stochasticity");
  if (c.analysis.checks.diagonal) checks.emplace_back("diagonal");
  if (c.analysis.checks.contraction) checks.emplace_back("contraction");
  if (c.analysis.checks.product_decay) checks.emplace_back("product_decay");
  if (c.analysis.checks.norms) checks.emplace_back("norms");
  os << "checks = ";
  if (checks.empty()) os << "none";
  for (std::size_t k = 0; k < checks.size(); ++k) os << (k ? ", " : "") << checks[k];
  os << "\n";
  os << "fit_lo = " << c.analysis.fit_lo << "\n";
  if (c.analysis.fit_hi) os << "fit_hi = " << *c.analysis.fit_hi << "\n";
  if (c.analysis.d) os << "d = " << *c.analysis.d << "\n";
  os << "fit_source = " << c.analysis.fit_source << "\n";
  return os.str();
}

void validate(const ExperimentConfig& c) {
  try {
    c.params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, "", e.what());
  }
  if (!c.seed) throw ConfigError(0, "run.seed", "missing (pass --seed or set it in the config)");
  if (c.horizon < 0) throw ConfigError(0, "run.horizon", "must be >= 0");
  if (c.ensemble < 1) throw ConfigError(0, "run.ensemble", "must be >= 1");
  if (c.record_every < 0) throw ConfigError(0, "run.record_every", "must be >= 0");
  if (c.schedule.kappa < 1) throw ConfigError(0, "schedule.kappa", "must be >= 1");
  if (c.schedule.edge_probability < 0.0 || c.schedule.edge_probability > 1.0) {
    throw ConfigError(0, "schedule.edge_probability", "must lie in [0, 1]");
  }
  if (c.schedule.kind == ScheduleKind::explicit_table && c.schedule.table.empty()) {
    throw ConfigError(0, "schedule.table", "required for explicit-table schedules");
  }
  if (c.schedule.kind == ScheduleKind::counterexample && c.params.n != 2) {
    throw ConfigError(0, "params.n", "the counterexample schedule needs exactly 2 agents");
  }
  if (c.analysis.fit_lo < 1) throw ConfigError(0, "analysis.fit_lo", "must be >= 1");
  if (c.analysis.d && *c.analysis.d < 1) throw ConfigError(0, "analysis.d", "must be >= 1");
}

GraphSchedule build_schedule(const ExperimentConfig& c) {
  const ScheduleSpec& s = c.schedule;
  try {
    switch (s.kind) {
      case ScheduleKind::empty:
        return make_empty_schedule(c.params.n);
      case ScheduleKind::periodic:
        return make_periodic_schedule(c.params.n, s.kappa, s.peer_rule, s.peer_edges);
      case ScheduleKind::random:
        return make_random_schedule(c.params.n, s.kappa, s.edge_probability,
                                    derive_seed(c.seed.value_or(0), StreamId::schedule, 0));
      case ScheduleKind::explicit_table: {
        const std::filesystem::path path = c.base_dir / s.table;
        std::ifstream in(path);
        if (!in) throw ConfigError(0, "schedule.table", "cannot open '" + path.string() + "'");
        return make_table_schedule(c.params.n, read_edge_table(in), s.horizon_hint);
      }
      case ScheduleKind::counterexample: {
        CounterexampleSetup setup;
        setup.precision_ratio = c.params.ratio();
        setup.initial_agent1 = c.params.initial_mean(1) - c.params.truth;
        setup.initial_agent2 = c.params.initial_mean(2) - c.params.truth;
        setup.horizon = std::max<Time>(c.horizon, 1);
        setup.rule.threshold_offset = s.threshold_offset;
        return make_counterexample_schedule(setup).schedule;
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, "schedule", e.what());
  }
  throw ConfigError(0, "schedule.kind", "unsupported");
}

}  // namespace lwr::cli
