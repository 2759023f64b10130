#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lwr/analysis.hpp"
#include "lwr/expected_process.hpp"

using namespace lwr;

namespace {

SystemParams make_params(int n, double initial = 2.0) {
  SystemParams p;
  p.n = n;
  p.initial_means = {initial};
  return p;
}

TransitionBundle bundle_at(const GraphSchedule& s, Time t, double ratio) {
  const Graph g = s.graph_at(t);
  return transition_bundle(adjacency_matrix(g), degree_of(g).as_matrix(), precision_at(s, t, ratio).as_matrix());
}

}  // namespace

TEST(TransitionBundle, NoEdgesIsIdentity) {
  const auto s = make_empty_schedule(3);
  const auto b = bundle_at(s, 0, 1.0);
  EXPECT_EQ(b.B, Matrix::Identity(3, 3));
  EXPECT_EQ(b.alpha, Vector::Zero(3));
  EXPECT_EQ(b.M, Matrix::Zero(3, 3));
  EXPECT_EQ(b.W, Matrix::Identity(4, 4));
}

TEST(TransitionBundle, SingleAgentHearingTruth) {
  const auto s = make_periodic_schedule(1, 1, PeerRule::none);
  for (double rho : {0.5, 1.0, 3.0}) {
    for (Time t : {0, 1, 7, 100}) {
      const auto b = bundle_at(s, t, rho);
      const double p = rho + static_cast<double>(t);
      EXPECT_NEAR(b.B(0, 0), p / (p + 1.0), 1e-15);
      EXPECT_NEAR(b.alpha[0], 1.0 / (p + 1.0), 1e-15);
      EXPECT_EQ(b.M(0, 0), 0.0);
    }
  }
}

TEST(TransitionBundle, RandomScheduleStochasticAndReduced) {
  const auto s = make_random_schedule(8, 3, 0.4, 123);
  PrecisionLedger ledger(8, 0.6);
  for (Time t = 0; t < 300; ++t) {
    const Graph g = s.graph_at(t);
    const auto b = transition_bundle(adjacency_matrix(g), degree_of(g).as_matrix(), ledger.as_matrix());
    const auto d = diagnose(b);
    EXPECT_LE(d.row_sum_error, 1e-12);
    EXPECT_LE(d.alpha_identity_error, 1e-12);
    EXPECT_GE(d.min_entry, 0.0);
    EXPECT_LE(d.b_norm_inf, 1.0 + 1e-12);
    // M is B without its diagonal self-weight.
    Matrix self = b.B - b.M;
    EXPECT_LE((self - Matrix(self.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 1e-15);
    ledger.advance(g);
  }
}

TEST(TransitionBundle, Errors) {
  EXPECT_THROW(build_transition_bundle(Matrix::Zero(3, 3), Matrix::Zero(2, 2), Matrix::Identity(3, 3)),
               std::invalid_argument);
  Matrix p = Matrix::Identity(3, 3);
  p(2, 2) = 0.0;
  Matrix a = Matrix::Zero(3, 3);
  a(0, 0) = 1.0;
  EXPECT_THROW(transition_bundle(a, Matrix::Zero(3, 3), p), std::invalid_argument);
  // Degrees inconsistent with the adjacency break stochasticity.
  a(1, 0) = 1.0;
  EXPECT_THROW(transition_bundle(a, Matrix::Zero(3, 3), Matrix::Identity(3, 3)), ContractViolation);
}

TEST(StepExpected, TruthIsAFixedPoint) {
  const auto s = make_random_schedule(5, 2, 0.5, 3);
  Vector y = Vector::Constant(6, 1.25);
  for (Time t = 0; t < 50; ++t) {
    y = step_expected(y, bundle_at(s, t, 1.0));
    for (int i = 0; i <= 5; ++i) EXPECT_NEAR(y[i], 1.25, 1e-12);
  }
}

TEST(StepExpected, DetectsDisagreeingRoutes) {
  const auto s = make_periodic_schedule(2, 1, PeerRule::ring);
  auto b = bundle_at(s, 0, 1.0);
  b.B(0, 1) += 1e-3;
  Vector y(3);
  y << 0.0, 2.0, 1.0;
  EXPECT_THROW(step_expected(y, b), ContractViolation);
}

TEST(StepExpected, CounterexamplePullPhase) {
  // Agent 1 listens to agent 2 only: y1' = (P11 y1 + y2) / (P11 + 1), y2 frozen.
  const auto s = make_table_schedule(2, {{0, 1, 2}, {1, 1, 2}, {2, 1, 2}});
  Vector y(3);
  y << 0.0, 1.5, 2.0;
  double y1 = 1.5, p11 = 1.0;
  for (Time t = 0; t < 3; ++t) {
    y = step_expected(y, bundle_at(s, t, 1.0));
    y1 = (p11 * y1 + 2.0) / (p11 + 1.0);
    p11 += 1.0;
    EXPECT_NEAR(y[1], y1, 1e-15);
    EXPECT_EQ(y[2], 2.0);
  }
}

TEST(RunExpected, SingleAgentTelescopingProduct) {
  const auto s = make_periodic_schedule(1, 1, PeerRule::none);
  for (double rho : {0.5, 1.0, 2.0}) {
    SystemParams p = make_params(1, 3.0);
    p.tau0 = rho;
    const auto traj = run_expected(s, p, 1000);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      const double t = static_cast<double>(traj.times[k]);
      EXPECT_NEAR(traj.z[k][0], 3.0 * rho / (rho + t), 1e-12);
    }
  }
}

TEST(RunExpected, HorizonZero) {
  SystemParams p = make_params(3);
  p.initial_means = {1.0, 2.0, 3.0};
  p.truth = 0.5;
  const auto traj = run_expected(make_periodic_schedule(3, 2, PeerRule::ring), p, 0);
  ASSERT_EQ(traj.times.size(), 1u);
  EXPECT_EQ(traj.y(0), (Vector(4) << 0.5, 1.0, 2.0, 3.0).finished());
}

TEST(RunExpected, PeriodicRingNormIsNonincreasingAndDecays) {
  const auto s = make_periodic_schedule(4, 3, PeerRule::ring);
  SystemParams p = make_params(4);
  p.initial_means = {2.0, -1.0, 0.5, 1.5};
  ExpectedRecordPlan plan;
  plan.every = 1;
  const auto traj = run_expected(s, p, 200'000, plan);
  for (std::size_t k = 1; k < traj.norms.size(); ++k) {
    ASSERT_LE(traj.norms[k], traj.norms[k - 1] + 1e-15) << "t = " << traj.times[k];
  }
  // Strict decay across every decade.
  for (Time t = 10; t <= 10'000; t *= 10) {
    EXPECT_LT(traj.norms[static_cast<std::size_t>(10 * t)], traj.norms[static_cast<std::size_t>(t)]);
  }
}

TEST(RunExpected, CounterexampleStaysAboveOne) {
  CounterexampleSetup setup;
  setup.horizon = 1'000'000;
  const auto ce = make_counterexample_schedule(setup);
  SystemParams p = make_params(2);
  double lowest = 2.0;
  for_each_expected(ce.schedule, p, setup.horizon,
                    [&](Time, const Vector& z, const PrecisionLedger&) { lowest = std::min(lowest, z.minCoeff()); });
  EXPECT_GE(lowest, 1.0);
}

TEST(RunExpected, TruthShiftInvariance) {
  const auto s = make_random_schedule(4, 3, 0.5, 77);
  SystemParams shifted = make_params(4);
  shifted.truth = 3.75;
  shifted.initial_means = {5.0, -1.0, 3.75, 10.5};
  SystemParams zero = shifted;
  zero.truth = 0.0;
  zero.initial_means.clear();
  for (double m : shifted.initial_means) zero.initial_means.push_back(m - shifted.truth);
  const auto a = run_expected(s, shifted, 300);
  const auto b = run_expected(s, zero, 300);
  ASSERT_EQ(a.z.size(), b.z.size());
  for (std::size_t k = 0; k < a.z.size(); ++k) EXPECT_EQ(a.z[k], b.z[k]);
}

TEST(ProductB, EmptyAndSingleStep) {
  const auto s = make_random_schedule(4, 2, 0.5, 5);
  const SystemParams p = make_params(4);
  EXPECT_EQ(product_B(s, p, 7, 7), Matrix::Identity(4, 4));
  EXPECT_LE((product_B(s, p, 8, 7) - bundle_at(s, 7, 1.0).B).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(product_B(s, p, 3, 4), std::invalid_argument);
}

TEST(ProductB, PropagatesZBetweenArbitraryTimes) {
  const auto s = make_random_schedule(6, 3, 0.4, 21);
  SystemParams p = make_params(6);
  p.initial_means = {2.0, -3.0, 1.0, 0.25, 4.0, -0.5};
  const auto traj = run_expected(s, p, 120);
  std::mt19937_64 pick(4);
  for (int k = 0; k < 50; ++k) {
    Time a = static_cast<Time>(pick() % 121), b = static_cast<Time>(pick() % 121);
    if (a < b) std::swap(a, b);
    const Matrix prod = product_B(s, p, a, b);
    EXPECT_LE(norm_inf(prod), 1.0 + 1e-12);
    const Vector predicted = prod * traj.z[static_cast<std::size_t>(b)];
    EXPECT_LE((predicted - traj.z[static_cast<std::size_t>(a)]).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ProductB, NormMatchesRunExpected) {
  const auto s = make_periodic_schedule(3, 2, PeerRule::ring);
  SystemParams p = make_params(3);
  p.initial_means = {2.0, 1.0, -1.0};
  const auto traj = run_expected(s, p, 200);
  const TransitionCache cache(s, p.ratio(), 200);
  for (Time t : {0, 1, 10, 57, 200}) {
    const Vector z = cache.product(t, 0) * traj.z[0];
    EXPECT_NEAR(z.cwiseAbs().maxCoeff(), traj.norms[static_cast<std::size_t>(t)], 1e-10);
    EXPECT_LE((cache.product(t, 0) - product_B(s, p, t, 0)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(TransitionCache, PrecisionDiagonalsFollowTheLedger) {
  const auto s = make_random_schedule(3, 2, 0.3, 6);
  const TransitionCache cache(s, 0.5, 40);
  EXPECT_EQ(cache.horizon(), 40);
  for (Time t = 0; t <= 40; ++t) EXPECT_EQ(cache.p_diag(t), precision_at(s, t, 0.5).diagonal());
  EXPECT_EQ(cache.max_degree(), max_degree(s, 40));
  EXPECT_THROW(cache.product(41, 0), std::out_of_range);
}

TEST(TruthPull, AccumulatedAlphaDominatesInverseDiagonal) {
  // alpha_t + ... + alpha_{t+kappa-1} >= Q_{t+kappa}^{-1} 1, with Q the
  // precision diagonal restricted to the learning agents.
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Time kappa = 3;
    const auto s = make_random_schedule(5, kappa, 0.3, seed);
    const TransitionCache cache(s, 0.8, 90);
    for (Time t = 0; t + kappa <= 90; ++t) {
      Vector acc = Vector::Zero(5);
      for (Time r = t; r < t + kappa; ++r) acc += cache.bundle(r).alpha;
      const Vector q_inv = cache.p_diag(t + kappa).tail(5).cwiseInverse();
      for (int i = 0; i < 5; ++i) {
        EXPECT_GE(acc[i], q_inv[i] - 1e-15) << t;
      }
    }
  }
}

TEST(MonteCarlo, EnsembleMeanMatchesExpectedProcess) {
  const auto s = make_periodic_schedule(3, 2, PeerRule::ring);
  SystemParams p = make_params(3);
  p.initial_means = {2.0, -1.0, 0.5};
  p.seed = 8;
  RecordingOptions rec;
  rec.every = 0;
  rec.times = {10, 50};
  const int runs = 500;
  const auto ens = run_ensemble(s, p, 50, runs, rec);
  const auto summary = summarize(ens);
  ExpectedRecordPlan plan;
  plan.every = 0;
  plan.times = {10, 50};
  const auto exp = run_expected(s, p, 50, plan);
  ASSERT_EQ(summary.times, exp.times);
  for (std::size_t k = 0; k < exp.times.size(); ++k) {
    const Vector y = exp.y(k);
    for (int i = 1; i <= 3; ++i) {
      const double se = std::sqrt(summary.variance[k][i] / runs);
      EXPECT_NEAR(summary.mean[k][i], y[i], 4.0 * se + 1e-15) << "t=" << exp.times[k] << " i=" << i;
    }
  }
}
