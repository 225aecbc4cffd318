#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "scool/em_common.hpp"
#include "scool/matrix.hpp"
#include "scool/optimizer.hpp"

namespace scool {

// Two-layer encoder of model deltas: e = W2 tanh(W1 x + b1) + b2.
// Parameter layout: W1 (hidden x input), b1, W2 (embed x hidden), b2.
struct Encoder {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 10;
  std::size_t embed_dim = 5;

  std::size_t parameter_count() const;
  std::vector<double> init_parameters(std::uint64_t seed, double scale = 1.0) const;
  void embed(std::span<const double> phi, std::span<const double> x, std::span<double> out) const;
  // Accumulates d(out . upstream)/dphi into dphi and writes d/dx into dx
  // (either may be empty to skip it).
  void backprop(std::span<const double> phi, std::span<const double> x,
                std::span<const double> upstream, std::span<double> dphi, std::span<double> dx) const;
};

struct AttentionState {
  Encoder encoder;
  std::vector<double> phi;
  // Row-stochastic over allowed neighbours, self included.
  Matrix w;
  Matrix p;
  double lambda = 0.01;
  // Temperature of the w softmax.
  double tau = 1.0;
  // Temperature of the attention scores inside p.
  double score_tau = 1.0;
  double eta2 = 0.1;
  // Adds -sum_j w_ij grad_theta_i log p_ij to the model update.
  bool coupling = true;
  Optimizer phi_optimizer;

  std::size_t clients() const { return w.rows(); }
};

struct AttentionInit {
  std::size_t hidden_dim = 10;
  std::size_t embed_dim = 5;
  double scale = 1.0;
  std::uint64_t seed = 0;
};

AttentionState make_attention_state(std::size_t clients, std::size_t model_dim, const Mask& mask,
                                    const AttentionInit& init);

void validate(const AttentionState& state);

// Embeddings E(theta_i - theta_i^0; phi), one row per client.
Matrix attention_embeddings(const Encoder& encoder, std::span<const double> phi,
                            std::span<const std::vector<double>> thetas,
                            std::span<const std::vector<double>> init_thetas);

// p_i. = softmax_tempered over allowed j (self included) of <e_i, e_j>.
Matrix attention_compute_p(std::span<const LocalModel> models, const Encoder& encoder,
                           std::span<const double> phi, double tau, const Mask& mask);
Matrix attention_compute_p(const Encoder& encoder, std::span<const double> phi,
                           std::span<const std::vector<double>> thetas,
                           std::span<const std::vector<double>> init_thetas, double tau,
                           const Mask& mask);

// w_i. = softmax_tempered(c_i. + log p_i., tau) over allowed j, where
// c_ij = log P(D_j | theta_i) for j != i and c_ii = 0 (the own-data term is
// not gated by the graph).
void attention_e_step_w(AttentionState& state, const Matrix& loglik, const Mask& mask);

// sum_i sum_j w_ij log p_ij.
double attention_objective(const Encoder& encoder, std::span<const double> phi,
                           std::span<const std::vector<double>> thetas,
                           std::span<const std::vector<double>> init_thetas, const Matrix& w,
                           double tau, const Mask& mask);

// Gradient of attention_objective with respect to phi.
std::vector<double> attention_phi_gradient(const Encoder& encoder, std::span<const double> phi,
                                           std::span<const std::vector<double>> thetas,
                                           std::span<const std::vector<double>> init_thetas,
                                           const Matrix& w, double tau, const Mask& mask);

// Row term sum_j w_ij log p_ij and its gradient in theta_i, differentiating
// only through client i's own embedding.
double attention_row_objective(const Encoder& encoder, std::span<const double> phi,
                               std::span<const std::vector<double>> thetas,
                               std::span<const std::vector<double>> init_thetas, const Matrix& w,
                               double tau, const Mask& mask, std::size_t i);
std::vector<double> attention_row_gradient(const Encoder& encoder, std::span<const double> phi,
                                           std::span<const std::vector<double>> thetas,
                                           std::span<const std::vector<double>> init_thetas,
                                           const Matrix& w, double tau, const Mask& mask,
                                           std::size_t i);

// Model update with the optional attention coupling term.
void attention_m_step_theta(std::vector<LocalModel>& models, std::span<const ClientData> clients,
                            const AttentionState& state, const Mask& mask, const MStepOptions& options);

// One ascent step of phi on sum_ij w_ij log p_ij; refreshes state.p.
void attention_m_step_phi(AttentionState& state, std::span<const LocalModel> models, const Mask& mask);

std::vector<std::vector<double>> thetas_of(std::span<const LocalModel> models);
std::vector<std::vector<double>> init_thetas_of(std::span<const LocalModel> models);

}  // namespace scool
