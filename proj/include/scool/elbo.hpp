#pragma once

#include <span>

#include "scool/attention.hpp"
#include "scool/local_model.hpp"
#include "scool/matrix.hpp"
#include "scool/mmsbm.hpp"
#include "scool/sbm.hpp"

namespace scool {

// Expected lower bound split into its named terms.
//   likelihood          sum_i loglik_ii + sum_{edge pairs} w_ij loglik_ij
//   model_prior         -lambda/2 sum_i |theta_i|^2
//   edge                expected log P(Y | memberships, B) (block priors) or
//                       sum_ij w_ij log p_ij (attention)
//   membership          expected log P(z | pi)
//   dirichlet           E log P(pi | alpha) - E log q(pi | gamma)
//   entropy_membership  entropy of q(z)
//   entropy_w           tau times the entropy of q(Y)
// A temperature of 1 gives the untempered bound.
struct ElboBreakdown {
  double likelihood = 0.0;
  double model_prior = 0.0;
  double edge = 0.0;
  double membership = 0.0;
  double dirichlet = 0.0;
  double entropy_membership = 0.0;
  double entropy_w = 0.0;
  double total = 0.0;

  double sum_of_terms() const {
    return likelihood + model_prior + edge + membership + dirichlet + entropy_membership + entropy_w;
  }
};

// -x log x - (1 - x) log(1 - x) with 0 log 0 = 0.
double bernoulli_entropy(double x);

ElboBreakdown sbm_elbo(const SbmState& state, const Matrix& loglik, const Mask& mask, double theta_sq_sum);
ElboBreakdown sbm_elbo(const SbmState& state, const Matrix& loglik, const Mask& mask,
                       std::span<const LocalModel> models);

ElboBreakdown mmsbm_elbo(const MmsbmState& state, const Matrix& loglik, const Mask& mask,
                         double theta_sq_sum);
ElboBreakdown mmsbm_elbo(const MmsbmState& state, const Matrix& loglik, const Mask& mask,
                         std::span<const LocalModel> models);

// Uses state.p as the attention prior.
ElboBreakdown attention_elbo(const AttentionState& state, const Matrix& loglik, const Mask& mask,
                             double theta_sq_sum);
ElboBreakdown attention_elbo(const AttentionState& state, const Matrix& loglik, const Mask& mask,
                             std::span<const LocalModel> models);

}  // namespace scool
