#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "scool/local_model.hpp"
#include "scool/matrix.hpp"
#include "scool/net_sim.hpp"
#include "scool/task_gen.hpp"

namespace scool {

inline constexpr double kBClamp = 1e-4;
inline constexpr double kAlphaFloor = 1e-3;
inline constexpr double kLogFloor = 1e-12;

inline double safe_log(double p) { return std::log(std::max(p, kLogFloor)); }

// Ordered pair (i, j) that carries an edge variable: off-diagonal and allowed.
inline bool is_edge_pair(const Mask& mask, std::size_t i, std::size_t j) {
  return i != j && mask(i, j);
}

// log P(D_j | theta_i) on client j's training split for every allowed pair,
// diagonal included; masked entries are left at 0 and never read.
Matrix compute_loglik(std::span<const LocalModel> models, std::span<const ClientData> clients,
                      const Mask& mask);

// Coordinate-ascent loop control for the block-prior E-steps.
struct EStepOptions {
  std::size_t max_iterations = 1;
  // Stop once no variational parameter moves by more than this.
  double tolerance = 0.0;
};

struct MStepOptions {
  double lambda = 0.0;
  double eta1 = 0.1;
  // Full-batch gradient steps when batch_size == 0, epochs otherwise.
  std::size_t local_steps = 1;
  std::size_t batch_size = 0;
  GradMode grad_mode = GradMode::TaylorApprox;
  std::uint64_t seed = 0;
  int round = 0;
};

// Deterministic minibatch plan for one round.
class BatchPlan {
 public:
  BatchPlan(std::span<const ClientData> clients, const MStepOptions& options);

  std::size_t steps() const { return steps_; }
  // Row indices of client j's batch at step m; empty means the full set.
  std::span<const std::size_t> rows(std::size_t client, std::size_t step) const;

 private:
  std::size_t steps_ = 0;
  std::size_t steps_per_epoch_ = 1;
  std::size_t batch_size_ = 0;
  // orders_[client][epoch] is a shuffled permutation of the client's rows.
  std::vector<std::vector<std::vector<std::size_t>>> orders_;
  std::vector<std::vector<std::vector<std::size_t>>> batches_;
};

// Extra descent-direction term added to each client's gradient in the
// cooperative M-step (the attention coupling uses this).
class GradientCoupling {
 public:
  virtual ~GradientCoupling() = default;
  // Called once per local step with every client's parameters at step start.
  virtual void prepare(std::span<const std::vector<double>> thetas) = 0;
  virtual void add(std::size_t client, std::span<double> grad) const = 0;
};

// theta_i <- theta_i - eta1 (grad L(D_i; theta_i) + sum_{j != i} w_ij g_ij + lambda theta_i)
// with g_ij = grad L(D_j; theta_i) (cross-gradient) or grad L(D_j; theta_j)
// (taylor-approx). All clients step synchronously from a shared snapshot.
// Throws DivergenceError naming the client and step on a non-finite gradient.
void cooperative_m_step(std::vector<LocalModel>& models, std::span<const ClientData> clients,
                        const Matrix& w, const Mask& mask, const MStepOptions& options,
                        GradientCoupling* coupling = nullptr);

// Independent local training of one client with the same batch plan.
void local_sgd(LocalModel& model, std::span<const ClientData> clients, std::size_t client,
               const MStepOptions& options);

// Gradient of the Dirichlet-parameter terms of the bound with respect to a
// shared alpha: sum_i E[log pi_ig] - K psi(alpha_g) + K psi(sum alpha).
std::vector<double> alpha_gradient(const Matrix& gamma, std::span<const double> alpha);

// E_q[log pi_ig] = psi(gamma_ig) - psi(sum_k gamma_ik).
Matrix expected_log_pi(const Matrix& gamma);

void check_finite(std::span<const double> v, const char* what, std::size_t client, std::size_t step);

}  // namespace scool
