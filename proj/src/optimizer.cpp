#include "scool/optimizer.hpp"

#include <cmath>

#include "scool/errors.hpp"

namespace scool {

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size()) throw InputError("optimizer: parameter/gradient size mismatch");
  ++steps_;
  const double lr = options_.learning_rate;
  if (options_.kind == OptimizerKind::Plain) {
    for (std::size_t k = 0; k < params.size(); ++k) params[k] -= lr * grad[k];
    return;
  }
  if (first_moment_.size() != params.size()) {
    first_moment_.assign(params.size(), 0.0);
    second_moment_.assign(params.size(), 0.0);
  }
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grad[k] + options_.weight_decay * params[k];
    first_moment_[k] = b1 * first_moment_[k] + (1.0 - b1) * g;
    second_moment_[k] = b2 * second_moment_[k] + (1.0 - b2) * g * g;
    params[k] -= lr * (first_moment_[k] / c1) / (std::sqrt(second_moment_[k] / c2) + options_.epsilon);
  }
}

}  // namespace scool
