#pragma once

#include <optional>
#include <string>

#include "lwr/analysis.hpp"

namespace lwr::detail {

double product_decay_rhs(Time m0, Time m, Time kappa, int d);
std::optional<std::string> product_decay_gate(const TransitionCache& cache, const SystemParams& params, Time m0,
                                              Time m, Time kappa, int d);

}  // namespace lwr::detail
