#pragma once

#include <span>
#include <vector>

#include "scool/em_common.hpp"
#include "scool/matrix.hpp"

namespace scool {

// Fixed cooperation graph of the Dirac prior.
struct DiracState {
  Matrix w;
  double alpha_lr = 0.1;

  double lambda() const { return 1.0 / alpha_lr; }
};

// Symmetric doubly-stochastic weights on the mask: w_ij = 1 / (1 + max(deg_i, deg_j)).
// Uniform 1/K on a fully connected graph.
Matrix metropolis_weights(const Mask& mask);

// Throws ConfigError unless w is symmetric, row-stochastic, non-negative and
// zero outside the mask.
void validate(const DiracState& state, const Mask& mask);

// One D-PSGD iteration: theta_i <- sum_j w_ij theta_j - alpha grad L(batch_i; theta_i),
// the gradient taken at the pre-averaging parameters.
void dpsgd_step(std::vector<LocalModel>& models, const DiracState& state,
                std::span<const ClientData> clients, const BatchPlan& plan, std::size_t step);

// Gradient step on sum_i L(D_i; theta_i) + lambda/2 sum_ij w_ij |theta_i - theta_j|^2,
// written without assuming symmetric w. With lambda = 1/alpha and symmetric
// row-stochastic w this is the D-PSGD iteration.
void dirac_map_step(std::vector<LocalModel>& models, const Matrix& w, double lambda, double alpha,
                    std::span<const ClientData> clients, const BatchPlan& plan, std::size_t step);

// One round of local steps with the D-PSGD iteration.
void dpsgd_round(std::vector<LocalModel>& models, const DiracState& state,
                 std::span<const ClientData> clients, const Mask& mask, const MStepOptions& options);

}  // namespace scool
