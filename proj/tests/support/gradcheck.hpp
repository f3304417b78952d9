#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "s2p/rng.hpp"
#include "s2p/tensor.hpp"

namespace s2p::testing {

// The absolute floor keeps near-zero gradients from dominating.
inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / scale;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct GradReport {
  double worst = 0.0;
  std::string where;
  int checked = 0;
};

// Central differences on up to `per_array` entries of every array in params,
// compared against analytic gradients.
inline GradReport check_parameter_gradients(ParameterSet& params, const Gradients& analytic,
                                            const std::function<double()>& loss, int per_array = 12,
                                            double h = 1e-4, std::uint64_t seed = 7) {
  GradReport rep;
  RngStream rng(seed);
  for (auto& p : params.entries()) {
    const Array* g = analytic.find(p.name);
    if (!g) continue;
    const std::size_t n = p.value.size();
    const std::size_t count = std::min<std::size_t>(n, static_cast<std::size_t>(per_array));
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t i = count == n ? k : rng.uniform_index(n);
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double up = loss();
      p.value[i] = saved - h;
      const double down = loss();
      p.value[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double err = relative_error((*g)[i], numeric);
      // Entries where both are tiny carry no signal.
      if (std::abs(numeric) < 1e-9 && std::abs((*g)[i]) < 1e-9) continue;
      ++rep.checked;
      if (err > rep.worst) {
        rep.worst = err;
        rep.where = p.name + "[" + std::to_string(i) + "] analytic=" + fmt((*g)[i]) +
                    " numeric=" + fmt(numeric);
      }
    }
  }
  return rep;
}

// Same check for a plain vector input.
inline GradReport check_vector_gradient(std::vector<double>& x, const std::vector<double>& analytic,
                                        const std::function<double()>& loss, double h = 1e-4) {
  GradReport rep;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = loss();
    x[i] = saved - h;
    const double down = loss();
    x[i] = saved;
    const double numeric = (up - down) / (2 * h);
    if (std::abs(numeric) < 1e-9 && std::abs(analytic[i]) < 1e-9) continue;
    ++rep.checked;
    const double err = relative_error(analytic[i], numeric);
    if (err > rep.worst) {
      rep.worst = err;
      rep.where = "x[" + std::to_string(i) + "] analytic=" + fmt(analytic[i]) +
                  " numeric=" + fmt(numeric);
    }
  }
  return rep;
}

}  // namespace s2p::testing
