#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "analysis_detail.hpp"
#include "lwr/analysis.hpp"
#include "lwr/rng.hpp"

namespace lwr {
namespace {

Matrix random_matrix(RngStream& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = 2.0 * rng.uniform() - 1.0;
  }
  return m;
}

struct Worst {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = std::numeric_limits<double>::infinity();

  void offer(double l, double r) {
    if (r - l < margin) {
      margin = r - l;
      lhs = l;
      rhs = r;
    }
  }
  BoundCheck check(int pairs) const {
    BoundCheck c = make_check(name, lhs, rhs);
    c.note = "worst of " + std::to_string(pairs) + " random pairs";
    return c;
  }
};

BoundCheck stochasticity_check(const TransitionBundle& bundle, Time t) {
  const BundleDiagnostics d = diagnose(bundle);
  const double err = std::max({d.row_sum_error, d.alpha_identity_error, d.two_forms_error, -d.min_entry,
                               d.b_norm_inf - 1.0});
  BoundCheck c = make_check("stochasticity(t=" + std::to_string(t) + ")", err, 0.0);
  if (c.failed()) {
    std::ostringstream os;
    os << "row-sum " << d.row_sum_error << ", alpha+B1 " << d.alpha_identity_error << ", min entry "
       << d.min_entry;
    c.note = os.str();
  }
  return c;
}

}  // namespace

std::vector<BoundCheck> check_norm_inequalities(int pairs, int max_dim, std::uint64_t seed) {
  if (pairs < 1 || max_dim < 1) throw std::invalid_argument("norm inequality check: bad arguments");
  RngStream rng(seed, StreamId::norm_property);
  Worst submult{"norm_inf_submultiplicative"};
  Worst mixed{"norm_max_mixed"};
  Worst sandwich{"norm_max_sandwich"};
  for (int k = 0; k < pairs; ++k) {
    const auto a = rng.uniform_int(1, max_dim);
    const auto b = rng.uniform_int(1, max_dim);
    const auto c = rng.uniform_int(1, max_dim);
    const Matrix r = random_matrix(rng, a, b);
    const Matrix s = random_matrix(rng, b, c);
    const Matrix sq = random_matrix(rng, b, b);
    submult.offer(norm_inf(r * s), norm_inf(r) * norm_inf(s));
    mixed.offer(norm_max(r * s), norm_inf(r) * norm_max(s));
    sandwich.offer(norm_max(r * sq * r.transpose()), norm_inf(r) * norm_inf(r) * norm_max(sq));
  }
  return {submult.check(pairs), mixed.check(pairs), sandwich.check(pairs)};
}

std::vector<BoundCheck> run_bound_suite(const GraphSchedule& schedule, const SystemParams& params, Time horizon,
                                        Time kappa, const SuiteSelection& selection, const SuiteHooks& hooks,
                                        std::uint64_t norm_seed) {
  std::vector<BoundCheck> out;
  if (selection.empty()) return out;
  if (kappa < 1) throw std::invalid_argument("bound suite needs kappa >= 1");

  const bool needs_cache =
      selection.stochasticity || selection.diagonal || selection.contraction || selection.product_decay;
  if (needs_cache) {
    const TransitionCache cache(schedule, params.ratio(), horizon);

    if (selection.stochasticity) {
      for (Time t = 0; t < horizon; ++t) {
        if (hooks.b_perturbation != 0.0 && t == hooks.perturb_time) {
          TransitionBundle corrupted = cache.bundle(t);
          corrupted.B(0, 0) += hooks.b_perturbation;
          out.push_back(stochasticity_check(corrupted, t));
        } else {
          out.push_back(stochasticity_check(cache.bundle(t), t));
        }
      }
    }
    if (selection.diagonal) {
      for (Time s = 0; s + kappa <= horizon; s += kappa) {
        for (Time l = 0; l < kappa; ++l) out.push_back(check_diagonal_bound(cache, s, l, kappa));
      }
    }
    if (selection.contraction) {
      for (Time s = 0; s + kappa <= horizon; s += kappa) out.push_back(check_contraction(cache, s, kappa));
    }
    if (selection.product_decay) {
      const int d = std::max(1, cache.max_degree());
      const auto m0 = static_cast<Time>(std::ceil(product_decay_threshold(params, kappa, d)));
      if (m0 * kappa > horizon) {
        std::ostringstream os;
        os << "horizon " << horizon << " shorter than m0*kappa = " << m0 * kappa;
        out.push_back(gated_check("product_decay(m0=" + std::to_string(m0) + ")", os.str()));
      } else {
        // Extend B_{(m0+m)kappa : m0 kappa} one window at a time.
        Matrix product = Matrix::Identity(cache.agents(), cache.agents());
        for (Time m = 0; (m0 + m) * kappa <= horizon; ++m) {
          if (m > 0) product = cache.product((m0 + m) * kappa, (m0 + m - 1) * kappa) * product;
          std::ostringstream name;
          name << "product_decay(m0=" << m0 << ",m=" << m << ",kappa=" << kappa << ",d=" << d << ")";
          if (auto why = detail::product_decay_gate(cache, params, m0, m, kappa, d)) {
            out.push_back(gated_check(name.str(), *why));
          } else {
            out.push_back(make_check(name.str(), norm_inf(product), detail::product_decay_rhs(m0, m, kappa, d)));
          }
        }
      }
    }
  }
  if (selection.norms) {
    auto norms = check_norm_inequalities(1000, 8, norm_seed);
    out.insert(out.end(), norms.begin(), norms.end());
  }
  return out;
}

}  // namespace lwr
