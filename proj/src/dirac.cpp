#include "scool/dirac.hpp"

#include <cmath>
#include <string>

#include "scool/errors.hpp"
#include "scool/parallel.hpp"

namespace scool {

namespace {

constexpr double kStochasticTol = 1e-9;

std::vector<std::vector<double>> snapshot_of(const std::vector<LocalModel>& models) {
  std::vector<std::vector<double>> out(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    out[i].assign(models[i].theta().begin(), models[i].theta().end());
  }
  return out;
}

std::vector<std::vector<double>> local_gradients(const std::vector<LocalModel>& models,
                                                 const std::vector<std::vector<double>>& snap,
                                                 std::span<const ClientData> clients,
                                                 const BatchPlan& plan, std::size_t step) {
  std::vector<std::vector<double>> g(models.size());
  parallel_for(models.size(), [&](std::size_t i) {
    g[i].assign(snap[i].size(), 0.0);
    evaluate(models[i].arch(), snap[i], clients[i].train, plan.rows(i, step), g[i]);
    check_finite(g[i], "gradient", i, step);
  });
  return g;
}

}  // namespace

Matrix metropolis_weights(const Mask& mask) {
  const std::size_t k = mask.size();
  if (!mask.symmetric()) throw ConfigError("metropolis weights need a symmetric mask");
  Matrix w(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (!is_edge_pair(mask, i, j)) continue;
      w(i, j) = 1.0 / (1.0 + static_cast<double>(std::max(mask.neighbors(i), mask.neighbors(j))));
      off += w(i, j);
    }
    w(i, i) = 1.0 - off;
  }
  return w;
}

void validate(const DiracState& state, const Mask& mask) {
  const Matrix& w = state.w;
  const std::size_t k = w.rows();
  if (w.cols() != k || mask.size() != k) throw ConfigError("dirac: w must be K x K matching the topology");
  if (!(state.alpha_lr > 0.0)) throw ConfigError("dirac: step size must be > 0");
  for (std::size_t i = 0; i < k; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double v = w(i, j);
      if (!std::isfinite(v) || v < 0.0) throw ConfigError("dirac: w has a negative or non-finite entry");
      if (!mask(i, j) && v != 0.0) {
        throw ConfigError("dirac: w(" + std::to_string(i) + "," + std::to_string(j) + ") is outside the topology");
      }
      if (std::abs(v - w(j, i)) > kStochasticTol) throw ConfigError("dirac: w is not symmetric");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kStochasticTol) {
      throw ConfigError("dirac: row " + std::to_string(i) + " of w does not sum to 1");
    }
  }
}

void dpsgd_step(std::vector<LocalModel>& models, const DiracState& state,
                std::span<const ClientData> clients, const BatchPlan& plan, std::size_t step) {
  const std::size_t k = models.size();
  const auto snap = snapshot_of(models);
  const auto g = local_gradients(models, snap, clients, plan, step);
  parallel_for(k, [&](std::size_t i) {
    auto theta = models[i].theta();
    for (std::size_t p = 0; p < theta.size(); ++p) {
      double avg = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        if (state.w(i, j) != 0.0) avg += state.w(i, j) * snap[j][p];
      }
      theta[p] = avg - state.alpha_lr * g[i][p];
    }
  });
}

void dirac_map_step(std::vector<LocalModel>& models, const Matrix& w, double lambda, double alpha,
                    std::span<const ClientData> clients, const BatchPlan& plan, std::size_t step) {
  const std::size_t k = models.size();
  const auto snap = snapshot_of(models);
  const auto g = local_gradients(models, snap, clients, plan, step);
  parallel_for(k, [&](std::size_t i) {
    auto theta = models[i].theta();
    for (std::size_t p = 0; p < theta.size(); ++p) {
      double pull = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double wij = 0.5 * (w(i, j) + w(j, i));
        if (wij != 0.0) pull += wij * (snap[i][p] - snap[j][p]);
      }
      theta[p] = snap[i][p] - alpha * (g[i][p] + lambda * pull);
    }
  });
}

void dpsgd_round(std::vector<LocalModel>& models, const DiracState& state,
                 std::span<const ClientData> clients, const Mask& mask, const MStepOptions& options) {
  validate(state, mask);
  if (clients.size() != models.size()) throw InputError("dpsgd: inconsistent client counts");
  const BatchPlan plan(clients, options);
  for (std::size_t step = 0; step < plan.steps(); ++step) dpsgd_step(models, state, clients, plan, step);
}

}  // namespace scool
