#include "s2p/optimizer.hpp"

#include <cmath>

#include "s2p/error.hpp"

namespace s2p {

UpdateRule parse_update_rule(const std::string& name) {
  if (name == "sgd") return UpdateRule::sgd;
  if (name == "adam") return UpdateRule::adam;
  throw Error(ErrorKind::config, "unknown optimizer '" + name + "'");
}

const char* to_string(UpdateRule rule) { return rule == UpdateRule::sgd ? "sgd" : "adam"; }

void optimizer_step(ParameterSet& params, const Gradients& grads, const OptimizerConfig& cfg) {
  for (auto& p : params.entries()) {
    if (p.frozen) continue;
    const Array* g = grads.find(p.name);
    if (!g) throw Error(ErrorKind::contract, "missing gradient for unfrozen array " + p.name);
    if (!g->same_shape(p.value)) throw Error(ErrorKind::shape, "gradient shape mismatch for " + p.name);

    auto w = p.value.values();
    auto gv = g->values();
    if (cfg.rule == UpdateRule::sgd) {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * gv[i];
      continue;
    }
    ++p.step;
    auto m = p.first_moment.values();
    auto v = p.second_moment.values();
    const double t = static_cast<double>(p.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gv[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gv[i] * gv[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

}  // namespace s2p
