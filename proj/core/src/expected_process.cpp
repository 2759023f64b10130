#include "lwr/expected_process.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lwr {

TransitionBundle build_transition_bundle(const Matrix& adjacency, const Matrix& degrees,
                                         const Matrix& precision_diag) {
  const Eigen::Index size = adjacency.rows();
  auto square = [size](const Matrix& m) { return m.rows() == size && m.cols() == size; };
  if (size < 2 || !square(adjacency) || !square(degrees) || !square(precision_diag)) {
    throw std::invalid_argument("transition_bundle: dimension mismatch");
  }
  const Vector p = precision_diag.diagonal();
  if ((p.array() <= 0.0).any()) throw std::invalid_argument("transition_bundle: nonpositive P diagonal");

  const Vector p_next = p + degrees.diagonal();
  const Eigen::Index n = size - 1;

  TransitionBundle bundle;
  bundle.W = adjacency;
  bundle.W.diagonal() += p;
  bundle.W = p_next.cwiseInverse().asDiagonal() * bundle.W;
  bundle.W.row(0).setZero();
  bundle.W(0, 0) = 1.0;

  Matrix pull = adjacency.bottomRightCorner(n, n);
  pull.diagonal() += p.tail(n);
  const auto inv_next = p_next.tail(n).cwiseInverse().asDiagonal();
  bundle.B = inv_next * pull;
  bundle.alpha = inv_next * adjacency.col(0).tail(n);
  bundle.M = inv_next * adjacency.bottomRightCorner(n, n);
  return bundle;
}

BundleDiagnostics diagnose(const TransitionBundle& bundle) {
  BundleDiagnostics d;
  const Eigen::Index n = bundle.B.rows();
  d.row_sum_error = (bundle.W.rowwise().sum().array() - 1.0).abs().maxCoeff();
  d.min_entry = std::min(bundle.W.minCoeff(), bundle.B.minCoeff());
  const Vector b_rows = bundle.B.rowwise().sum();
  d.alpha_identity_error = (bundle.alpha + b_rows - Vector::Ones(n)).cwiseAbs().maxCoeff();
  d.b_norm_inf = bundle.B.cwiseAbs().rowwise().sum().maxCoeff();
  d.two_forms_error = std::max((bundle.W.bottomRightCorner(n, n) - bundle.B).cwiseAbs().maxCoeff(),
                               (bundle.W.col(0).tail(n) - bundle.alpha).cwiseAbs().maxCoeff());
  return d;
}

TransitionBundle transition_bundle(const Matrix& adjacency, const Matrix& degrees, const Matrix& precision_diag) {
  TransitionBundle bundle = build_transition_bundle(adjacency, degrees, precision_diag);
  const BundleDiagnostics d = diagnose(bundle);
  if (!d.ok()) {
    throw ContractViolation("transition bundle invariant failed: row-sum error " + std::to_string(d.row_sum_error) +
                            ", alpha identity error " + std::to_string(d.alpha_identity_error) + ", min entry " +
                            std::to_string(d.min_entry));
  }
  return bundle;
}

Vector step_expected(const Vector& y, const TransitionBundle& bundle) {
  if (y.size() != bundle.W.rows()) throw std::invalid_argument("step_expected: dimension mismatch");
  const double truth = y[0];
  const Eigen::Index n = bundle.B.rows();
  Vector next = bundle.W * y;
  next[0] = truth;

  const Vector z = y.tail(n).array() - truth;
  const Vector z_next = bundle.B * z;
  const double scale = std::max({1.0, std::abs(truth), y.cwiseAbs().maxCoeff()});
  const double gap = ((next.tail(n).array() - truth).matrix() - z_next).cwiseAbs().maxCoeff();
  if (gap > 1e-10 * scale) {
    throw ContractViolation("step_expected: W-route and B-route disagree by " + std::to_string(gap));
  }
  return next;
}

TransitionCache::TransitionCache(const GraphSchedule& schedule, double ratio, Time horizon)
    : agents_(schedule.agents()) {
  if (horizon < 0) throw std::invalid_argument("cache horizon must be >= 0");
  PrecisionLedger ledger(agents_, ratio);
  graphs_.reserve(static_cast<std::size_t>(horizon));
  bundles_.reserve(static_cast<std::size_t>(horizon));
  p_diag_.reserve(static_cast<std::size_t>(horizon) + 1);
  p_diag_.push_back(ledger.diagonal());
  for (Time t = 0; t < horizon; ++t) {
    Graph g = schedule.graph_at(t);
    const DegreeMatrix degrees = degree_of(g);
    max_degree_ = std::max(max_degree_, degrees.max());
    bundles_.push_back(transition_bundle(adjacency_matrix(g), degrees.as_matrix(), ledger.as_matrix()));
    ledger.advance(degrees);
    p_diag_.push_back(ledger.diagonal());
    graphs_.push_back(std::move(g));
  }
}

Matrix TransitionCache::product(Time t, Time s) const {
  if (t < s) throw std::invalid_argument("product B_{t:s} needs t >= s");
  if (t > horizon()) throw std::out_of_range("product beyond cached horizon");
  Matrix acc = Matrix::Identity(agents_, agents_);
  for (Time k = s; k < t; ++k) acc = bundle(k).B * acc;
  return acc;
}

Matrix product_B(const GraphSchedule& schedule, const SystemParams& params, Time t, Time s) {
  if (t < s) throw std::invalid_argument("product B_{t:s} needs t >= s");
  if (s < 0) throw std::out_of_range("negative time");
  PrecisionLedger ledger = precision_at(schedule, s, params.ratio());
  Matrix acc = Matrix::Identity(schedule.agents(), schedule.agents());
  for (Time k = s; k < t; ++k) {
    const Graph g = schedule.graph_at(k);
    const DegreeMatrix degrees = degree_of(g);
    acc = transition_bundle(adjacency_matrix(g), degrees.as_matrix(), ledger.as_matrix()).B * acc;
    ledger.advance(degrees);
  }
  return acc;
}

Vector ExpectedTrajectory::y(std::size_t k) const {
  const Vector& zk = z.at(k);
  Vector out(zk.size() + 1);
  out[0] = truth;
  out.tail(zk.size()) = zk.array() + truth;
  return out;
}

void for_each_expected(const GraphSchedule& schedule, const SystemParams& params, Time horizon,
                       const ExpectedVisitor& visit) {
  params.validate();
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  if (schedule.agents() != params.n) throw std::invalid_argument("schedule and params disagree on n");
  const int n = params.n;

  Vector z(n);
  for (int i = 1; i <= n; ++i) z[i - 1] = params.initial_mean(i) - params.truth;
  Vector next(n);
  PrecisionLedger ledger(n, params.ratio());

  bool forms_checked = false;
  for (Time t = 0;; ++t) {
    visit(t, z, ledger);
    if (t == horizon) break;
    const Graph g = schedule.graph_at(t);
    for (int i = 1; i <= n; ++i) {
      const double p = ledger.diag(i);
      double acc = p * z[i - 1];
      for (int j : g.sources(i)) {
        if (j > 0) acc += z[j - 1];
      }
      next[i - 1] = acc / (p + static_cast<double>(g.degree(i)));
    }
    if (!forms_checked) {
      // Once per run: the edge-list recursion must match W_t acting on y_t,
      // and P_t + D_t must equal the advanced ledger.
      const DegreeMatrix degrees = degree_of(g);
      const TransitionBundle bundle = transition_bundle(adjacency_matrix(g), degrees.as_matrix(), ledger.as_matrix());
      Vector y(n + 1);
      y[0] = 0.0;
      y.tail(n) = z;
      const Vector via_w = step_expected(y, bundle);
      const double scale = std::max(1.0, z.cwiseAbs().maxCoeff());
      if ((via_w.tail(n) - next).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw ContractViolation("edge-list expected step disagrees with W_t");
      }
      PrecisionLedger advanced = ledger;
      advanced.advance(degrees);
      if (advanced.diagonal() != ledger.diagonal() + degrees.as_matrix().diagonal()) {
        throw ContractViolation("P_t + D_t differs from P_{t+1}");
      }
      forms_checked = true;
    }
    z.swap(next);
    ledger.advance(g);
  }
}

ExpectedTrajectory run_expected(const GraphSchedule& schedule, const SystemParams& params, Time horizon,
                                const ExpectedRecordPlan& plan) {
  ExpectedTrajectory out;
  out.truth = params.truth;
  std::vector<Time> extra = plan.times;
  std::sort(extra.begin(), extra.end());
  auto next_extra = extra.begin();
  for_each_expected(schedule, params, horizon, [&](Time t, const Vector& z, const PrecisionLedger&) {
    while (next_extra != extra.end() && *next_extra < t) ++next_extra;
    const bool record = t == 0 || t == horizon || (plan.every > 0 && t % plan.every == 0) ||
                        (next_extra != extra.end() && *next_extra == t);
    if (!record) return;
    out.times.push_back(t);
    out.z.push_back(z);
    out.norms.push_back(z.size() ? z.cwiseAbs().maxCoeff() : 0.0);
  });
  return out;
}

}  // namespace lwr
