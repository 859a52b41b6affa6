#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "maligan/param_store.hpp"

namespace testutil {

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

/// Central finite differences of `value` over every parameter in the store,
/// compared against `analytic` (flat order). Returns the max relative error.
inline double max_fd_rel_err(maligan::ParamStore& store, const std::function<double()>& value,
                             const std::vector<double>& analytic, double step = 1e-5) {
  std::vector<double> theta = store.flat_values();
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    std::vector<double> p = theta;
    p[i] = theta[i] + step;
    store.set_flat_values(p);
    const double up = value();
    p[i] = theta[i] - step;
    store.set_flat_values(p);
    const double down = value();
    const double fd = (up - down) / (2.0 * step);
    worst = std::max(worst, rel_err(fd, analytic[i]));
  }
  store.set_flat_values(theta);
  return worst;
}

}  // namespace testutil
