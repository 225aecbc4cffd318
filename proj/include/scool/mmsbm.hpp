#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "scool/em_common.hpp"
#include "scool/matrix.hpp"
#include "scool/optimizer.hpp"
#include "scool/sbm.hpp"

namespace scool {

// Mixed-membership block prior. Every ordered edge pair (i, j) carries its
// own sender indicator phi_send(i, j) (drawn from pi_i) and receiver
// indicator phi_recv(i, j) (drawn from pi_j). Entries of non-edge pairs are
// kept uniform and never read.
struct MmsbmState {
  Matrix w;
  Matrix gamma;
  PairTensor phi_send;
  PairTensor phi_recv;
  std::vector<double> alpha;
  Matrix B;
  double lambda = 0.01;
  double tau = 1.0;
  double eta2 = 0.1;
  Optimizer alpha_optimizer;

  std::size_t clients() const { return w.rows(); }
  std::size_t memberships() const { return alpha.size(); }
};

MmsbmState make_mmsbm_state(std::size_t clients, std::size_t memberships, const Mask& mask,
                            const BlockPriorInit& init);

void validate(const MmsbmState& state);

// Closed-form block updates; each is the exact maximiser of the bound in its
// own block with every other block held fixed.
void mmsbm_update_w(MmsbmState& state, const Matrix& loglik, const Mask& mask);
void mmsbm_update_gamma(MmsbmState& state, const Mask& mask);
void mmsbm_update_phi_send(MmsbmState& state, const Mask& mask);
void mmsbm_update_phi_recv(MmsbmState& state, const Mask& mask);

// Cycles w, gamma, phi_send, phi_recv until nothing moves by more than the
// tolerance or the iteration cap is hit. Returns the iterations used.
std::size_t mmsbm_e_step(MmsbmState& state, const Matrix& loglik, const Mask& mask,
                         const EStepOptions& options = {});

void mmsbm_m_step_alpha(MmsbmState& state);

// B(g,h) = sum_ij w_ij phi_send_ij,g phi_recv_ij,h / sum_ij phi_send_ij,g phi_recv_ij,h.
void mmsbm_m_step_B(MmsbmState& state, const Mask& mask,
                    DegeneratePolicy policy = DegeneratePolicy::Throw);

// Model update (same form as the SBM one), then alpha and B.
void mmsbm_m_step(MmsbmState& state, std::vector<LocalModel>& models,
                  std::span<const ClientData> clients, const Mask& mask, const MStepOptions& options,
                  DegeneratePolicy policy = DegeneratePolicy::Throw);

}  // namespace scool
