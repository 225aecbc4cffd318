#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace scool {

enum class OptimizerKind { Plain, Adam };

struct OptimizerOptions {
  OptimizerKind kind = OptimizerKind::Plain;
  double learning_rate = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // L2 coupling added to the descent direction (Adam variant only).
  double weight_decay = 0.0;
};

// Descent on `params` given `grad` of the objective being minimised.
// Callers doing ascent pass the negated gradient.
class Optimizer {
 public:
  Optimizer() = default;
  explicit Optimizer(OptimizerOptions options) : options_(options) {}

  const OptimizerOptions& options() const { return options_; }
  std::size_t steps() const { return steps_; }

  void step(std::span<double> params, std::span<const double> grad);

 private:
  OptimizerOptions options_;
  std::vector<double> first_moment_;
  std::vector<double> second_moment_;
  std::size_t steps_ = 0;
};

}  // namespace scool
