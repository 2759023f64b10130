#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "lwr/belief_core.hpp"
#include "lwr/graph_dynamics.hpp"

namespace lwr {

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Per-step matrices of the expected recursion.
//   W     = (P_t + D_t)^{-1} (P_t + A_t), full (n+1)x(n+1); row 0 is e_0 since
//           the truth agent has infinite precision.
//   B     = rows/cols 1..n of P_{t+1}^{-1} (P_t + A_t)
//   alpha = (P_{t+1}^{-1})_ii where (i, 0) is an edge, else 0
//   M     = rows/cols 1..n of P_{t+1}^{-1} A_t
struct TransitionBundle {
  Matrix W;
  Matrix B;
  Vector alpha;
  Matrix M;
};

struct BundleDiagnostics {
  double row_sum_error = 0.0;        // max_i |sum_j W_ij - 1|
  double min_entry = 0.0;            // min over W and B entries
  double alpha_identity_error = 0.0; // max_i |alpha_i + (B 1)_i - 1|
  double b_norm_inf = 0.0;
  double two_forms_error = 0.0;      // max |W - P_{t+1}^{-1}(P_t + A_t)| on rows 1..n

  bool ok(double tol = 1e-12) const {
    return row_sum_error <= tol && min_entry >= 0.0 && alpha_identity_error <= tol &&
           b_norm_inf <= 1.0 + tol && two_forms_error <= tol;
  }
};

BundleDiagnostics diagnose(const TransitionBundle& bundle);

// Builds the bundle without validation; used by fault-injection hooks.
TransitionBundle build_transition_bundle(const Matrix& adjacency, const Matrix& degrees, const Matrix& precision_diag);

// Validated version. Throws std::invalid_argument on dimension mismatch or
// nonpositive P diagonal, ContractViolation if an invariant fails.
TransitionBundle transition_bundle(const Matrix& adjacency, const Matrix& degrees, const Matrix& precision_diag);

// y_{t+1} = W y_t, cross-checked against z_{t+1} = B z_t with z = y - truth.
// Throws ContractViolation when the two routes disagree beyond 1e-10 (scaled).
Vector step_expected(const Vector& y, const TransitionBundle& bundle);

// Caches B_t and the P_t diagonals over [0, horizon) so products over
// bound-check windows cost O(window * n^3).
class TransitionCache {
 public:
  TransitionCache(const GraphSchedule& schedule, double ratio, Time horizon);

  Time horizon() const { return static_cast<Time>(bundles_.size()); }
  int agents() const { return agents_; }
  const TransitionBundle& bundle(Time t) const { return bundles_.at(static_cast<std::size_t>(t)); }
  // Diagonal of P_t for 0 <= t <= horizon.
  const Vector& p_diag(Time t) const { return p_diag_.at(static_cast<std::size_t>(t)); }
  const Graph& graph(Time t) const { return graphs_.at(static_cast<std::size_t>(t)); }
  int max_degree() const { return max_degree_; }

  // B_{t:s} = B_{t-1} ... B_s, identity when t == s.
  Matrix product(Time t, Time s) const;

 private:
  int agents_;
  std::vector<Graph> graphs_;
  std::vector<TransitionBundle> bundles_;
  std::vector<Vector> p_diag_;
  int max_degree_ = 0;
};

Matrix product_B(const GraphSchedule& schedule, const SystemParams& params, Time t, Time s);

struct ExpectedRecordPlan {
  Time every = 1;             // 0 disables periodic recording
  std::vector<Time> times;    // extra explicit times
};

struct ExpectedTrajectory {
  double truth = 0.0;
  std::vector<Time> times;
  std::vector<Vector> z;      // learning agents only, truth-shifted
  std::vector<double> norms;  // ||z_t||_inf at the recorded times

  Vector y(std::size_t k) const;  // (truth, truth + z) at recorded index k
};

// Step-by-step visitor over t = 0..horizon; z is truth-shifted (agents only).
using ExpectedVisitor = std::function<void(Time t, const Vector& z, const PrecisionLedger& ledger)>;
void for_each_expected(const GraphSchedule& schedule, const SystemParams& params, Time horizon,
                       const ExpectedVisitor& visit);

// Deterministic; t = 0 and t = horizon are always recorded.
ExpectedTrajectory run_expected(const GraphSchedule& schedule, const SystemParams& params, Time horizon,
                                const ExpectedRecordPlan& plan = {});

}  // namespace lwr
