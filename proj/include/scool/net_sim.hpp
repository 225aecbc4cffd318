#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "scool/matrix.hpp"

namespace scool {

enum class TopologyKind { FullyConnected, GroupRing, Bipartite, Custom };

enum class GradMode { CrossGradient, TaylorApprox };

struct TopologyParams {
  // group-ring: i ~ j iff min(|i-j|, K-|i-j|) <= (K - K0) / 2.
  std::size_t ring_k0 = 0;
  // generalized bipartite: neighbours drawn from the opposite half.
  std::size_t bipartite_degree = 0;
  std::uint64_t seed = 0;
  // used verbatim for TopologyKind::Custom
  Mask custom;
};

struct Topology {
  TopologyKind kind = TopologyKind::FullyConnected;
  Mask mask;
};

Topology build_topology(TopologyKind kind, std::size_t num_clients, const TopologyParams& params = {});

// Keeps, per row, the ceil(keep_fraction * (K - 1)) largest off-diagonal
// weights among the currently allowed neighbours (ties to the lower index).
// Returns `mask` unchanged while current_round < activate_round.
Mask sparsify_topk(const Matrix& w, const Mask& mask, double keep_fraction, int current_round,
                   int activate_round);

// One-shot pruning: fires the first time the activation round is reached
// and leaves the mask frozen afterwards.
class Sparsifier {
 public:
  Sparsifier() = default;
  Sparsifier(double keep_fraction, int activate_round);

  bool enabled() const { return keep_fraction_ < 1.0; }
  bool applied() const { return applied_; }
  double keep_fraction() const { return keep_fraction_; }
  int activate_round() const { return activate_round_; }

  // Returns true when the mask was pruned during this call.
  bool maybe_apply(const Matrix& w, Mask& mask, int completed_rounds);

 private:
  double keep_fraction_ = 1.0;
  int activate_round_ = 0;
  bool applied_ = false;
};

// What a round's exchange carries.
enum class ExchangeKind {
  // loglik evaluation plus cooperative gradient traffic
  Cooperative,
  // neighbour model fetches only (D-PSGD)
  ModelAveraging,
  None,
};

// Traffic is counted in vector units: one unit is one model-parameter vector.
struct RoundTraffic {
  int round = 0;
  std::size_t directed_edges = 0;
  double models_sent = 0.0;
  double gradients_sent = 0.0;
  double scalars_sent = 0.0;
  // Models shipped to neighbours for the loglik matrix.
  double eval_units = 0.0;
  double mstep_units = 0.0;
  // eval_units + mstep_units: evaluation traffic counted as extra.
  double total_units = 0.0;
  // Evaluation payload folded into the first M-step shipment when the same
  // model vector serves both (cross-gradient mode only).
  double total_units_shared = 0.0;
  bool payload_shared = false;
  std::vector<double> per_client_units;
};

struct CommLedger {
  std::vector<RoundTraffic> rounds;
  double total_units = 0.0;
  double total_units_shared = 0.0;
  double total_scalars = 0.0;
  double total_floats = 0.0;
  std::vector<double> per_client_units;
};

// Appends one round of traffic. `local_sweeps` is the number of M-step
// gradient sweeps performed in the round.
void account_exchange(CommLedger& ledger, const Mask& mask, GradMode grad_mode,
                      std::size_t num_clients, std::size_t model_dim, std::size_t local_sweeps,
                      ExchangeKind kind = ExchangeKind::Cooperative, int round = 0);

std::string to_string(TopologyKind kind);
std::string to_string(GradMode mode);

}  // namespace scool
