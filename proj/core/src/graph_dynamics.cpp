#include "lwr/graph_dynamics.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <sstream>

#include "lwr/rng.hpp"

namespace lwr {

void Graph::add_edge(int receiver, int source, bool allow_self_loop) {
  const int n = agents();
  if (receiver < 0 || receiver > n || source < 0 || source > n) {
    throw std::invalid_argument("edge (" + std::to_string(receiver) + ", " + std::to_string(source) +
                                ") has an endpoint outside {0.." + std::to_string(n) + "}");
  }
  if (receiver == 0) {
    throw std::invalid_argument("the truth agent never receives");
  }
  if (receiver == source && !allow_self_loop) {
    throw std::invalid_argument("self-loop on agent " + std::to_string(receiver));
  }
  auto& list = sources_[static_cast<std::size_t>(receiver)];
  if (std::find(list.begin(), list.end(), source) == list.end()) {
    list.insert(std::upper_bound(list.begin(), list.end(), source), source);
  }
}

bool Graph::hears_truth(int receiver) const {
  const auto& list = sources(receiver);
  return !list.empty() && list.front() == 0;
}

PeerRule parse_peer_rule(std::string_view name) {
  if (name == "none") return PeerRule::none;
  if (name == "ring") return PeerRule::ring;
  if (name == "complete") return PeerRule::complete;
  if (name == "edge_list" || name == "edges") return PeerRule::edge_list;
  throw std::invalid_argument("unknown peer rule '" + std::string(name) + "'");
}

std::string_view to_string(PeerRule rule) {
  switch (rule) {
    case PeerRule::none: return "none";
    case PeerRule::ring: return "ring";
    case PeerRule::complete: return "complete";
    case PeerRule::edge_list: return "edge_list";
  }
  return "none";
}

GraphSchedule::GraphSchedule(int agents, Generator generator, std::optional<Time> horizon, std::string kind)
    : agents_(agents), generator_(std::move(generator)), horizon_(horizon), kind_(std::move(kind)) {
  if (agents_ < 1) throw std::invalid_argument("a schedule needs at least one learning agent");
}

Graph GraphSchedule::graph_at(Time t) const {
  if (t < 0) throw std::out_of_range("negative time " + std::to_string(t));
  if (horizon_ && t >= *horizon_) {
    throw std::out_of_range(kind_ + " schedule queried at t=" + std::to_string(t) + " beyond horizon " +
                            std::to_string(*horizon_));
  }
  return generator_(t);
}

int DegreeMatrix::max() const {
  return diag.empty() ? 0 : *std::max_element(diag.begin(), diag.end());
}

Matrix DegreeMatrix::as_matrix() const {
  Vector d(static_cast<Eigen::Index>(diag.size()));
  for (std::size_t i = 0; i < diag.size(); ++i) d[static_cast<Eigen::Index>(i)] = diag[i];
  return d.asDiagonal();
}

PrecisionLedger::PrecisionLedger(int agents, double ratio)
    : ratio_(ratio), counts_(static_cast<std::size_t>(agents) + 1, 0) {
  if (!(ratio > 0.0)) throw std::invalid_argument("precision ratio tau0/tau must be positive");
}

Vector PrecisionLedger::diagonal() const {
  Vector p(static_cast<Eigen::Index>(counts_.size()));
  for (std::size_t i = 0; i < counts_.size(); ++i) p[static_cast<Eigen::Index>(i)] = diag(static_cast<int>(i));
  return p;
}

Matrix PrecisionLedger::as_matrix() const { return diagonal().asDiagonal(); }

void PrecisionLedger::advance(const DegreeMatrix& degrees) {
  if (degrees.diag.size() != counts_.size()) throw std::invalid_argument("degree/ledger dimension mismatch");
  for (std::size_t i = 1; i < counts_.size(); ++i) counts_[i] += degrees.diag[i];
  ++time_;
}

void PrecisionLedger::advance(const Graph& graph) {
  if (graph.agents() != agents()) throw std::invalid_argument("graph/ledger dimension mismatch");
  for (int i = 1; i <= agents(); ++i) counts_[static_cast<std::size_t>(i)] += graph.degree(i);
  ++time_;
}

Matrix adjacency_matrix(const Graph& graph) {
  const int n = graph.agents();
  Matrix a = Matrix::Zero(n + 1, n + 1);
  a(0, 0) = 1.0;
  for (int i = 1; i <= n; ++i) {
    for (int j : graph.sources(i)) a(i, j) = 1.0;
  }
  return a;
}

Matrix adjacency_at(const GraphSchedule& schedule, Time t) { return adjacency_matrix(schedule.graph_at(t)); }

DegreeMatrix degree_at(const Matrix& adjacency) {
  DegreeMatrix d;
  d.diag.assign(static_cast<std::size_t>(adjacency.rows()), 0);
  for (Eigen::Index i = 1; i < adjacency.rows(); ++i) {
    d.diag[static_cast<std::size_t>(i)] = static_cast<int>(adjacency.row(i).sum());
  }
  return d;
}

DegreeMatrix degree_of(const Graph& graph) {
  DegreeMatrix d;
  d.diag.assign(static_cast<std::size_t>(graph.agents()) + 1, 0);
  for (int i = 1; i <= graph.agents(); ++i) d.diag[static_cast<std::size_t>(i)] = graph.degree(i);
  return d;
}

PrecisionLedger precision_at(const GraphSchedule& schedule, Time t, double ratio) {
  if (t < 0) throw std::out_of_range("negative time");
  PrecisionLedger ledger(schedule.agents(), ratio);
  for (Time k = 0; k < t; ++k) ledger.advance(schedule.graph_at(k));
  return ledger;
}

int max_degree(const GraphSchedule& schedule, Time horizon) {
  int d = 0;
  for (Time t = 0; t < horizon; ++t) {
    const Graph g = schedule.graph_at(t);
    for (int i = 1; i <= g.agents(); ++i) d = std::max(d, g.degree(i));
  }
  return d;
}

TruthHearingVerdict verify_truth_hearing(const GraphSchedule& schedule, Time kappa, Time horizon) {
  if (kappa < 1) throw std::invalid_argument("kappa must be >= 1");
  const int n = schedule.agents();
  // last[i] = most recent truth time of agent i (-1 before the first one). A
  // gap of kappa or more empty steps starting at last+1 is a violating window.
  std::vector<Time> last(static_cast<std::size_t>(n) + 1, -1);
  TruthHearingVerdict verdict;
  auto report = [&](int agent, Time start) {
    if (verdict.pass || start < verdict.window_start ||
        (start == verdict.window_start && agent < verdict.agent)) {
      verdict = {false, agent, start};
    }
  };
  Time end = horizon;
  for (Time t = 0; t < horizon; ++t) {
    // Any still-open gap that started earlier is already kappa long here.
    if (!verdict.pass && t > verdict.window_start + kappa) {
      end = t;
      break;
    }
    const Graph g = schedule.graph_at(t);
    for (int i = 1; i <= n; ++i) {
      if (!g.hears_truth(i)) continue;
      auto& l = last[static_cast<std::size_t>(i)];
      if (t - l - 1 >= kappa) report(i, l + 1);
      l = t;
    }
  }
  for (int i = 1; i <= n; ++i) {
    const Time l = last[static_cast<std::size_t>(i)];
    if (end - l - 1 >= kappa) report(i, l + 1);
  }
  return verdict;
}

bool hears_truth_in_window(const GraphSchedule& schedule, Time start, Time kappa) {
  const int n = schedule.agents();
  std::vector<bool> heard(static_cast<std::size_t>(n) + 1, false);
  int remaining = n;
  for (Time t = start; t < start + kappa && remaining > 0; ++t) {
    const Graph g = schedule.graph_at(t);
    for (int i = 1; i <= n; ++i) {
      if (!heard[static_cast<std::size_t>(i)] && g.hears_truth(i)) {
        heard[static_cast<std::size_t>(i)] = true;
        --remaining;
      }
    }
  }
  return remaining == 0;
}

GraphSchedule make_empty_schedule(int agents) {
  return GraphSchedule(agents, [agents](Time) { return Graph(agents); }, std::nullopt, "empty");
}

GraphSchedule make_periodic_schedule(int agents, Time kappa, PeerRule rule,
                                     std::vector<std::pair<int, int>> peer_edges) {
  if (agents < 1) throw std::invalid_argument("periodic schedule needs n >= 1");
  if (kappa < 1) throw std::invalid_argument("periodic schedule needs kappa >= 1");
  if (rule != PeerRule::edge_list && !peer_edges.empty()) {
    throw std::invalid_argument("peer edges given but peer rule is not edge_list");
  }

  Graph peers(agents);
  switch (rule) {
    case PeerRule::none:
      break;
    case PeerRule::ring:
      if (agents > 1) {
        for (int i = 1; i <= agents; ++i) peers.add_edge(i, i % agents + 1);
      }
      break;
    case PeerRule::complete:
      for (int i = 1; i <= agents; ++i) {
        for (int j = 1; j <= agents; ++j) {
          if (i != j) peers.add_edge(i, j);
        }
      }
      break;
    case PeerRule::edge_list:
      for (const auto& [i, j] : peer_edges) {
        if (i == 0 || j == 0) throw std::invalid_argument("peer edges must not involve the truth agent");
        peers.add_edge(i, j);
      }
      break;
  }

  auto generator = [peers = std::move(peers), agents, kappa](Time t) {
    Graph g = peers;
    for (int i = 1; i <= agents; ++i) {
      if (t % kappa == i % kappa) g.add_edge(i, 0);
    }
    return g;
  };
  return GraphSchedule(agents, std::move(generator), std::nullopt, "periodic");
}

GraphSchedule make_random_schedule(int agents, Time kappa, double edge_probability, std::uint64_t seed) {
  if (agents < 1) throw std::invalid_argument("random schedule needs n >= 1");
  if (kappa < 1) throw std::invalid_argument("random schedule needs kappa >= 1");
  if (!(edge_probability >= 0.0 && edge_probability <= 1.0)) {
    throw std::invalid_argument("edge probability must lie in [0, 1]");
  }
  // A truth edge in every aligned block of length ceil(kappa/2) puts one in
  // every sliding kappa-window, not just the aligned ones.
  const Time block = (kappa + 1) / 2;
  auto generator = [agents, block, edge_probability, seed](Time t) {
    Graph g(agents);
    const Time window = t / block;
    for (int i = 1; i <= agents; ++i) {
      RngStream pick(derive_seed(seed, StreamId::schedule_window, static_cast<std::uint64_t>(window),
                                 static_cast<std::uint64_t>(i)));
      if (window * block + pick.uniform_int(0, block - 1) == t) g.add_edge(i, 0);
    }
    if (edge_probability > 0.0) {
      RngStream draw(derive_seed(seed, StreamId::schedule_step, static_cast<std::uint64_t>(t)));
      for (int i = 1; i <= agents; ++i) {
        for (int j = 1; j <= agents; ++j) {
          if (i != j && draw.bernoulli(edge_probability)) g.add_edge(i, j);
        }
      }
    }
    return g;
  };
  return GraphSchedule(agents, std::move(generator), std::nullopt, "random");
}

GraphSchedule make_table_schedule(int agents, const std::vector<TableEdge>& edges, std::optional<Time> horizon) {
  Time max_t = -1;
  for (const auto& e : edges) {
    if (e.t < 0) throw std::invalid_argument("edge table has negative time");
    max_t = std::max(max_t, e.t);
  }
  const Time h = horizon.value_or(max_t + 1);
  if (max_t >= h) throw std::invalid_argument("edge table has entries beyond its horizon");

  std::vector<Graph> table(static_cast<std::size_t>(h), Graph(agents));
  for (const auto& e : edges) table[static_cast<std::size_t>(e.t)].add_edge(e.receiver, e.source);
  auto shared = std::make_shared<const std::vector<Graph>>(std::move(table));
  return GraphSchedule(
      agents, [shared](Time t) { return (*shared)[static_cast<std::size_t>(t)]; }, h, "explicit-table");
}

std::vector<TableEdge> read_edge_table(std::istream& in) {
  std::vector<TableEdge> edges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    TableEdge e{};
    if (!(fields >> e.t)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw std::invalid_argument("edge table line " + std::to_string(line_no) + ": expected 't i j'");
    }
    std::string rest;
    if (!(fields >> e.receiver >> e.source) || (fields >> rest)) {
      throw std::invalid_argument("edge table line " + std::to_string(line_no) + ": expected 't i j'");
    }
    edges.push_back(e);
  }
  return edges;
}

}  // namespace lwr
