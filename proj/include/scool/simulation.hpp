#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "scool/attention.hpp"
#include "scool/dirac.hpp"
#include "scool/elbo.hpp"
#include "scool/em_common.hpp"
#include "scool/mmsbm.hpp"
#include "scool/net_sim.hpp"
#include "scool/optimizer.hpp"
#include "scool/sbm.hpp"

namespace scool {

enum class PriorKind { Dirac, Sbm, Attention, Mmsbm, LocalOnly };

std::string to_string(PriorKind kind);

struct SimulationConfig {
  PriorKind prior = PriorKind::Sbm;
  // eta1, local steps, batch size, grad mode and seed; lambda is taken from
  // the prior state below.
  MStepOptions mstep;
  double lambda = 0.01;
  double tau = 1.0;
  // Attention score temperature inside p.
  double score_tau = 1.0;
  double eta2 = 0.1;
  OptimizerOptions variational_optimizer;
  std::size_t memberships = 3;
  BlockPriorInit block_init;
  EStepOptions estep{.max_iterations = 50, .tolerance = 1e-9};
  AttentionInit attention_init;
  bool attention_coupling = true;
  // Dirac weights; empty means Metropolis weights on the mask.
  Matrix dirac_w;
  double sparsify_keep = 1.0;
  int sparsify_round = 10;
  bool compute_elbo = true;
};

struct RoundResult {
  int round = 0;
  // Bound evaluated right after the E-step (block and attention priors only).
  std::optional<ElboBreakdown> elbo;
  bool sparsified = false;
  RoundTraffic traffic;
};

// Alg. 1 driver: per round, loglik on allowed pairs, the prior's E-step,
// local M-step sweeps, the remaining prior-parameter updates, then the
// one-shot sparsification check and traffic accounting.
class Simulation {
 public:
  Simulation(SimulationConfig config, std::vector<LocalModel> models, std::vector<ClientData> clients,
             Mask mask);

  RoundResult run_round();

  // Local-only gradient steps that initialise the personalised models before
  // the first E-step. No traffic is charged and theta^0 stays at the shared
  // starting point.
  void warm_up(std::size_t steps);

  int completed_rounds() const { return completed_; }
  const SimulationConfig& config() const { return config_; }
  const std::vector<LocalModel>& models() const { return models_; }
  std::vector<LocalModel>& models() { return models_; }
  const std::vector<ClientData>& clients() const { return clients_; }
  const Mask& mask() const { return mask_; }
  const CommLedger& ledger() const { return ledger_; }

  // Current cooperation weights of the active prior (identity for local-only).
  Matrix graph() const;

  const SbmState* sbm() const { return sbm_ ? &*sbm_ : nullptr; }
  const MmsbmState* mmsbm() const { return mmsbm_ ? &*mmsbm_ : nullptr; }
  const AttentionState* attention() const { return attention_ ? &*attention_ : nullptr; }
  const DiracState* dirac() const { return dirac_ ? &*dirac_ : nullptr; }

 private:
  SimulationConfig config_;
  std::vector<LocalModel> models_;
  std::vector<ClientData> clients_;
  Mask mask_;
  Sparsifier sparsifier_;
  CommLedger ledger_;
  int completed_ = 0;

  std::optional<SbmState> sbm_;
  std::optional<MmsbmState> mmsbm_;
  std::optional<AttentionState> attention_;
  std::optional<DiracState> dirac_;
};

}  // namespace scool
