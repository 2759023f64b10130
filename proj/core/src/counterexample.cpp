#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>

#include "lwr/graph_dynamics.hpp"

namespace lwr {
namespace {

enum class Link : std::uint8_t { agent1_truth, agent1_from_2, agent2_truth, agent2_from_1 };

Graph graph_for(Link link) {
  Graph g(2);
  switch (link) {
    case Link::agent1_truth: g.add_edge(1, 0); break;
    case Link::agent1_from_2: g.add_edge(1, 2); break;
    case Link::agent2_truth: g.add_edge(2, 0); break;
    case Link::agent2_from_1: g.add_edge(2, 1); break;
  }
  return g;
}

// Expected means of both agents (truth-shifted) and their P diagonals.
struct CoRun {
  double y1, y2;
  double p1, p2;
  double min_value;

  void observe() { min_value = std::min({min_value, y1, y2}); }
  void apply(Link link) {
    switch (link) {
      case Link::agent1_truth: y1 = p1 * y1 / (p1 + 1.0); p1 += 1.0; break;
      case Link::agent1_from_2: y1 = (p1 * y1 + y2) / (p1 + 1.0); p1 += 1.0; break;
      case Link::agent2_truth: y2 = p2 * y2 / (p2 + 1.0); p2 += 1.0; break;
      case Link::agent2_from_1: y2 = (p2 * y2 + y1) / (p2 + 1.0); p2 += 1.0; break;
    }
    observe();
  }
};

}  // namespace

Counterexample make_counterexample_schedule(const CounterexampleSetup& setup) {
  if (setup.horizon < 1) throw std::invalid_argument("counterexample horizon must be >= 1");
  if (!(setup.precision_ratio > 0.0)) throw std::invalid_argument("precision ratio must be positive");

  const Time horizon = setup.horizon;
  std::vector<Link> links;
  links.reserve(static_cast<std::size_t>(horizon));
  std::vector<SwitchRound> rounds;

  CoRun run{setup.initial_agent1, setup.initial_agent2, setup.precision_ratio, setup.precision_ratio, 0.0};
  run.min_value = std::min(run.y1, run.y2);

  auto threshold = [&](int k) { return std::ldexp(1.0, -2 * k - setup.rule.threshold_offset); };
  auto push = [&](Link link) {
    links.push_back(link);
    run.apply(link);
  };
  auto time = [&] { return static_cast<Time>(links.size()); };

  for (int k = 1; time() < horizon; ++k) {
    SwitchRound round;
    round.k = k;
    round.t_k = time();
    round.y_tk_agent2 = run.y2;
    if (run.y2 < 1.0 + std::ldexp(1.0, -2 * k)) {
      throw ConstructionError("round " + std::to_string(k) + ": y_{t_k,2} = " + std::to_string(run.y2) +
                              " fell below 1 + 2^{-2k}");
    }
    push(Link::agent1_truth);
    while (time() < horizon && std::abs(run.y1 - run.y2) > threshold(k)) push(Link::agent1_from_2);
    if (time() >= horizon) {
      rounds.push_back(round);
      break;
    }

    round.s_k = time();
    round.y_sk_agent1 = run.y1;
    if (run.y1 < 1.0 + std::ldexp(1.0, -2 * k + 1)) {
      throw ConstructionError("round " + std::to_string(k) + ": y_{s_k,1} = " + std::to_string(run.y1) +
                              " fell below 1 + 2^{-2k+1}");
    }
    rounds.push_back(round);
    push(Link::agent2_truth);
    while (time() < horizon && std::abs(run.y1 - run.y2) > threshold(k)) push(Link::agent2_from_1);
  }

  auto table = std::make_shared<const std::vector<Link>>(std::move(links));
  GraphSchedule schedule(
      2, [table](Time t) { return graph_for((*table)[static_cast<std::size_t>(t)]); }, horizon, "counterexample");
  return Counterexample{std::move(schedule), std::move(rounds), run.min_value};
}

}  // namespace lwr
