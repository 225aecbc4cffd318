#include "scool/net_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "scool/errors.hpp"

namespace scool {

Topology build_topology(TopologyKind kind, std::size_t num_clients, const TopologyParams& params) {
  const std::size_t k = num_clients;
  if (k == 0) throw ConfigError("topology needs at least one client");
  Topology topo{kind, Mask(k)};

  switch (kind) {
    case TopologyKind::FullyConnected:
      topo.mask = Mask::full(k);
      break;

    case TopologyKind::GroupRing: {
      if (params.ring_k0 >= k) {
        throw ConfigError("group-ring requires K0 < K (K0=" + std::to_string(params.ring_k0) +
                          ", K=" + std::to_string(k) + ")");
      }
      const std::size_t span = k - params.ring_k0;  // compare 2*dist <= K - K0
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const std::size_t d = i > j ? i - j : j - i;
          if (2 * d <= span || 2 * (k - d) <= span) topo.mask.set(i, j, true);
        }
      }
      break;
    }

    case TopologyKind::Bipartite: {
      const std::size_t degree = params.bipartite_degree;
      if (degree == 0 || 2 * degree > k) {
        throw ConfigError("bipartite degree must be in [1, K/2] (degree=" + std::to_string(degree) +
                          ", K=" + std::to_string(k) + ")");
      }
      std::mt19937_64 rng(params.seed);
      std::vector<std::size_t> order(k);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      const std::vector<std::size_t> left(order.begin(), order.begin() + static_cast<long>(k / 2));
      const std::vector<std::size_t> right(order.begin() + static_cast<long>(k / 2), order.end());
      auto connect = [&](const std::vector<std::size_t>& from, const std::vector<std::size_t>& to) {
        for (std::size_t i : from) {
          std::vector<std::size_t> pool = to;
          std::shuffle(pool.begin(), pool.end(), rng);
          for (std::size_t n = 0; n < degree; ++n) {
            topo.mask.set(i, pool[n], true);
            topo.mask.set(pool[n], i, true);
          }
        }
      };
      connect(left, right);
      connect(right, left);
      break;
    }

    case TopologyKind::Custom: {
      if (params.custom.size() != k) throw ConfigError("custom mask has the wrong size");
      topo.mask = params.custom;
      break;
    }
  }

  if (k > 1) {
    for (std::size_t i = 0; i < k; ++i) {
      if (topo.mask.neighbors(i) == 0) {
        throw ConfigError("topology leaves client " + std::to_string(i) + " without neighbours");
      }
    }
  }
  return topo;
}

Mask sparsify_topk(const Matrix& w, const Mask& mask, double keep_fraction, int current_round,
                   int activate_round) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw ConfigError("keep_fraction must be in (0, 1]");
  }
  if (current_round < activate_round || keep_fraction == 1.0) return mask;
  const std::size_t k = mask.size();
  if (w.rows() != k || w.cols() != k) throw InputError("sparsify_topk: w and mask sizes differ");
  if (k < 2) return mask;

  const auto keep = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(k - 1) - 1e-12));
  Mask out(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<std::size_t> cand;
    bool any_positive = false;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i || !mask(i, j)) continue;
      cand.push_back(j);
      any_positive = any_positive || w(i, j) > 0.0;
    }
    if (cand.empty()) continue;
    if (!any_positive) {
      throw ConfigError("sparsify_topk: row " + std::to_string(i) + " has no positive weight to rank");
    }
    std::stable_sort(cand.begin(), cand.end(),
                     [&](std::size_t a, std::size_t b) { return w(i, a) > w(i, b); });
    const std::size_t n = std::min(keep, cand.size());
    for (std::size_t r = 0; r < n; ++r) out.set(i, cand[r], true);
  }
  return out;
}

Sparsifier::Sparsifier(double keep_fraction, int activate_round)
    : keep_fraction_(keep_fraction), activate_round_(activate_round) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw ConfigError("sparsify keep fraction must be in (0, 1]");
  }
}

bool Sparsifier::maybe_apply(const Matrix& w, Mask& mask, int completed_rounds) {
  if (!enabled() || applied_ || completed_rounds < activate_round_) return false;
  mask = sparsify_topk(w, mask, keep_fraction_, completed_rounds, activate_round_);
  applied_ = true;
  return true;
}

void account_exchange(CommLedger& ledger, const Mask& mask, GradMode grad_mode,
                      std::size_t num_clients, std::size_t model_dim, std::size_t local_sweeps,
                      ExchangeKind kind, int round) {
  const std::size_t k = num_clients;
  RoundTraffic t;
  t.round = round;
  t.directed_edges = mask.directed_edges();
  t.per_client_units.assign(k, 0.0);
  const double sweeps = static_cast<double>(local_sweeps);

  // Directed edge (i, j): client i learns from client j's data or model.
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j || !mask(i, j)) continue;
      switch (kind) {
        case ExchangeKind::Cooperative:
          t.models_sent += 1.0;  // theta_i shipped to j for log P(D_j | theta_i)
          t.scalars_sent += 1.0;
          t.eval_units += 1.0;
          t.per_client_units[i] += 1.0;
          if (grad_mode == GradMode::CrossGradient) {
            t.models_sent += sweeps;
            t.gradients_sent += sweeps;
            t.mstep_units += 2.0 * sweeps;
            t.per_client_units[i] += sweeps;
            t.per_client_units[j] += sweeps;
          } else {
            t.gradients_sent += sweeps;
            t.mstep_units += sweeps;
            t.per_client_units[j] += sweeps;
          }
          break;
        case ExchangeKind::ModelAveraging:
          t.models_sent += sweeps;
          t.mstep_units += sweeps;
          t.per_client_units[j] += sweeps;
          break;
        case ExchangeKind::None:
          break;
      }
    }
  }

  t.total_units = t.eval_units + t.mstep_units;
  t.payload_shared = kind == ExchangeKind::Cooperative && grad_mode == GradMode::CrossGradient &&
                     local_sweeps > 0;
  t.total_units_shared = t.payload_shared ? t.mstep_units : t.total_units;

  ledger.total_units += t.total_units;
  ledger.total_units_shared += t.total_units_shared;
  ledger.total_scalars += t.scalars_sent;
  ledger.total_floats += t.total_units * static_cast<double>(model_dim) + t.scalars_sent;
  if (ledger.per_client_units.size() != k) ledger.per_client_units.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) ledger.per_client_units[i] += t.per_client_units[i];
  ledger.rounds.push_back(std::move(t));
}

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::FullyConnected:
      return "fully-connected";
    case TopologyKind::GroupRing:
      return "group-ring";
    case TopologyKind::Bipartite:
      return "bipartite";
    case TopologyKind::Custom:
      return "custom";
  }
  return "unknown";
}

std::string to_string(GradMode mode) {
  return mode == GradMode::CrossGradient ? "cross-gradient" : "taylor-approx";
}

}  // namespace scool
