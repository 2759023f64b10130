#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lwr/analysis.hpp"
#include "lwr/belief_core.hpp"
#include "lwr/graph_dynamics.hpp"

namespace lwr::cli {

// Carries the config line (0 when not tied to one) and the "section.key" field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, std::string field, const std::string& message);
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

enum class ScheduleKind { empty, periodic, random, counterexample, explicit_table };
std::string_view to_string(ScheduleKind kind);

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::periodic;
  Time kappa = 1;
  PeerRule peer_rule = PeerRule::none;
  std::vector<std::pair<int, int>> peer_edges;  // receiver, source
  double edge_probability = 0.0;
  std::string table;                 // path, relative to the config file
  std::optional<Time> horizon_hint;
  int threshold_offset = 2;

  bool operator==(const ScheduleSpec&) const = default;
};

struct AnalysisSpec {
  SuiteSelection checks;
  Time fit_lo = 1;
  std::optional<Time> fit_hi;   // defaults to the run horizon
  std::optional<int> d;         // defaults to the schedule's max degree
  std::string fit_source = "expected";  // expected | summary

  bool operator==(const AnalysisSpec& o) const {
    return checks.stochasticity == o.checks.stochasticity && checks.diagonal == o.checks.diagonal &&
           checks.contraction == o.checks.contraction && checks.product_decay == o.checks.product_decay &&
           checks.norms == o.checks.norms && fit_lo == o.fit_lo && fit_hi == o.fit_hi && d == o.d &&
           fit_source == o.fit_source;
  }
};

struct ExperimentConfig {
  SystemParams params;
  ScheduleSpec schedule;
  Time horizon = 1;
  int ensemble = 1;
  Time record_every = 1;
  std::optional<std::uint64_t> seed;
  std::string output = "out";
  AnalysisSpec analysis;
  std::filesystem::path base_dir;  // directory of the config file; not serialized

  bool operator==(const ExperimentConfig& o) const;
};

// Flat sectioned key-value text: "[section]" headers, "key = value" lines,
// '#' comments. Unknown sections or keys are errors.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical text; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

// Cross-field checks (seed present, horizon >= 1, ensemble >= 1, ...).
void validate(const ExperimentConfig& config);

// Schedule described by the config. Random schedules draw from a stream
// derived from the master seed.
GraphSchedule build_schedule(const ExperimentConfig& config);

}  // namespace lwr::cli
