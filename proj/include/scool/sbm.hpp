#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "scool/em_common.hpp"
#include "scool/matrix.hpp"
#include "scool/optimizer.hpp"

namespace scool {

// Variational and model parameters of the stochastic-block-model prior.
//   w     K x K  Bernoulli means of the cooperation edges; w_ii is pinned to 1
//                and masked pairs to 0
//   gamma K x M  Dirichlet parameters of q(pi_i)
//   omega K x M  membership probabilities of q(z_i), rows on the simplex
//   alpha M      shared Dirichlet prior parameter
//   B     M x M  block edge probabilities, kept in [kBClamp, 1 - kBClamp]
struct SbmState {
  Matrix w;
  Matrix gamma;
  Matrix omega;
  std::vector<double> alpha;
  Matrix B;
  double lambda = 0.01;
  double tau = 1.0;
  double eta2 = 0.1;
  Optimizer alpha_optimizer;

  std::size_t clients() const { return omega.rows(); }
  std::size_t memberships() const { return omega.cols(); }
};

struct BlockPriorInit {
  double alpha = 1.0;
  double b_within = 0.8;
  double b_between = 0.2;
  // Dirichlet(1) draws for the initial memberships; 0 gives uniform rows.
  double membership_jitter = 1.0;
  std::uint64_t seed = 0;
};

SbmState make_sbm_state(std::size_t clients, std::size_t memberships, const BlockPriorInit& init);

// Throws InvariantError if any parameter has left its admissible set.
void validate(const SbmState& state);

// w_ij = sigmoid_tempered(loglik_ij + sum_gh Omega_ig Omega_jh logit B(g,h), tau)
// on every edge pair.
void sbm_e_step_w(SbmState& state, const Matrix& loglik, const Mask& mask);

// gamma_ig = Omega_ig + alpha_g.
void sbm_e_step_gamma(SbmState& state);

struct SweepOptions {
  std::size_t max_sweeps = 1;
  // Stop early once no membership entry moves by more than this.
  double tolerance = 0.0;
};

// Membership update. Each sweep visits clients in index order and replaces
// row i by its exact maximiser given the other rows (softmax of the linear
// coefficients). Returns the number of sweeps performed.
std::size_t sbm_e_step_omega(SbmState& state, const Mask& mask, const SweepOptions& options = {});

// Softmax logits of row i's membership update (exposed for tests).
std::vector<double> sbm_omega_logits(const SbmState& state, const Mask& mask, std::size_t i);

// Cycles w, Omega (one sweep) and gamma until nothing moves by more than the
// tolerance or the iteration cap is hit. Returns the iterations used.
std::size_t sbm_e_step(SbmState& state, const Matrix& loglik, const Mask& mask,
                       const EStepOptions& options = {});

// One projected step alpha_g <- max(alpha_g + eta2 * dL/dalpha_g, kAlphaFloor).
void sbm_m_step_alpha(SbmState& state);

enum class DegeneratePolicy { Throw, KeepPrevious };

// B(a,b) = sum_ij w_ij Omega_ia Omega_jb / sum_ij Omega_ia Omega_jb over edge
// pairs, clamped to [kBClamp, 1 - kBClamp].
void sbm_m_step_B(SbmState& state, const Mask& mask,
                  DegeneratePolicy policy = DegeneratePolicy::Throw);

}  // namespace scool
