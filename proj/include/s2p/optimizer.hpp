#pragma once

#include <string>

#include "s2p/tensor.hpp"

namespace s2p {

enum class UpdateRule { sgd, adam };

UpdateRule parse_update_rule(const std::string& name);
const char* to_string(UpdateRule rule);

struct OptimizerConfig {
  UpdateRule rule = UpdateRule::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Applies one update to every unfrozen array. Frozen arrays (and their
// optimizer state) are left bitwise untouched. Throws contract if an
// unfrozen array has no gradient.
void optimizer_step(ParameterSet& params, const Gradients& grads, const OptimizerConfig& config);

}  // namespace s2p
