#include "scool/em_common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "scool/core_math.hpp"
#include "scool/errors.hpp"
#include "scool/parallel.hpp"
#include "scool/seeding.hpp"

namespace scool {

std::size_t worker_count() {
  std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SCOOL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return hw;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  // Rethrow the lowest-index failure so the reported error does not depend on scheduling.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Matrix compute_loglik(std::span<const LocalModel> models, std::span<const ClientData> clients,
                      const Mask& mask) {
  const std::size_t k = models.size();
  if (clients.size() != k || mask.size() != k) throw InputError("compute_loglik: inconsistent K");
  Matrix out(k, k);
  parallel_for(k, [&](std::size_t i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (!mask(i, j)) continue;
      out(i, j) = log_likelihood(models[i], clients[j].train);
    }
  });
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (mask(i, j) && !std::isfinite(out(i, j))) {
        throw DivergenceError("log-likelihood of model " + std::to_string(i) + " on client " + std::to_string(j) +
                              " became non-finite");
      }
    }
  }
  return out;
}

BatchPlan::BatchPlan(std::span<const ClientData> clients, const MStepOptions& options)
    : batch_size_(options.batch_size) {
  if (batch_size_ == 0) {
    steps_ = options.local_steps;
    return;
  }
  std::size_t max_batches = 1;
  for (const auto& c : clients) {
    max_batches = std::max(max_batches, (c.train.size() + batch_size_ - 1) / batch_size_);
  }
  steps_per_epoch_ = max_batches;
  steps_ = options.local_steps * steps_per_epoch_;
  batches_.resize(clients.size());
  for (std::size_t j = 0; j < clients.size(); ++j) {
    const std::size_t n = clients[j].train.size();
    batches_[j].resize(options.local_steps);
    for (std::size_t e = 0; e < options.local_steps; ++e) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 rng(derive_seed(options.seed, {0xba7c, static_cast<std::uint64_t>(options.round), j, e}));
      std::shuffle(order.begin(), order.end(), rng);
      batches_[j][e] = std::move(order);
    }
  }
}

std::span<const std::size_t> BatchPlan::rows(std::size_t client, std::size_t step) const {
  if (batch_size_ == 0) return {};
  const auto& order = batches_[client][step / steps_per_epoch_];
  const std::size_t n = order.size();
  const std::size_t nb = (n + batch_size_ - 1) / batch_size_;
  const std::size_t b = (step % steps_per_epoch_) % nb;
  const std::size_t begin = b * batch_size_;
  const std::size_t end = std::min(n, begin + batch_size_);
  return std::span<const std::size_t>(order).subspan(begin, end - begin);
}

void check_finite(std::span<const double> v, const char* what, std::size_t client, std::size_t step) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw DivergenceError(std::string(what) + " became non-finite for client " +
                            std::to_string(client) + " at local step " + std::to_string(step));
    }
  }
}

void cooperative_m_step(std::vector<LocalModel>& models, std::span<const ClientData> clients,
                        const Matrix& w, const Mask& mask, const MStepOptions& options,
                        GradientCoupling* coupling) {
  const std::size_t k = models.size();
  if (clients.size() != k || w.rows() != k || mask.size() != k) {
    throw InputError("cooperative_m_step: inconsistent client counts");
  }
  if (!(options.eta1 > 0.0)) throw ConfigError("eta1 must be > 0");
  const BatchPlan plan(clients, options);
  const bool cross = options.grad_mode == GradMode::CrossGradient;

  std::vector<std::vector<double>> snapshot(k);
  std::vector<std::vector<double>> own(k);
  for (std::size_t step = 0; step < plan.steps(); ++step) {
    for (std::size_t i = 0; i < k; ++i) {
      snapshot[i].assign(models[i].theta().begin(), models[i].theta().end());
    }
    if (coupling) coupling->prepare(snapshot);

    parallel_for(k, [&](std::size_t j) {
      own[j].assign(snapshot[j].size(), 0.0);
      evaluate(models[j].arch(), snapshot[j], clients[j].train, plan.rows(j, step), own[j]);
    });

    parallel_for(k, [&](std::size_t i) {
      std::vector<double> g = own[i];
      std::vector<double> cross_grad;
      for (std::size_t j = 0; j < k; ++j) {
        if (!is_edge_pair(mask, i, j) || w(i, j) == 0.0) continue;
        const std::vector<double>* gij = &own[j];
        if (cross) {
          cross_grad.assign(g.size(), 0.0);
          evaluate(models[i].arch(), snapshot[i], clients[j].train, plan.rows(j, step), cross_grad);
          gij = &cross_grad;
        }
        const double wij = w(i, j);
        for (std::size_t p = 0; p < g.size(); ++p) g[p] += wij * (*gij)[p];
      }
      if (options.lambda != 0.0) {
        for (std::size_t p = 0; p < g.size(); ++p) g[p] += options.lambda * snapshot[i][p];
      }
      if (coupling) coupling->add(i, g);
      check_finite(g, "gradient", i, step);
      auto theta = models[i].theta();
      for (std::size_t p = 0; p < g.size(); ++p) theta[p] = snapshot[i][p] - options.eta1 * g[p];
    });
  }
}

void local_sgd(LocalModel& model, std::span<const ClientData> clients, std::size_t client,
               const MStepOptions& options) {
  const BatchPlan plan(clients, options);
  std::vector<double> g(model.theta().size());
  for (std::size_t step = 0; step < plan.steps(); ++step) {
    evaluate(model.arch(), model.theta(), clients[client].train, plan.rows(client, step), g);
    auto theta = model.theta();
    if (options.lambda != 0.0) {
      for (std::size_t p = 0; p < g.size(); ++p) g[p] += options.lambda * theta[p];
    }
    check_finite(g, "gradient", client, step);
    for (std::size_t p = 0; p < g.size(); ++p) theta[p] = theta[p] - options.eta1 * g[p];
  }
}

Matrix expected_log_pi(const Matrix& gamma) {
  Matrix out(gamma.rows(), gamma.cols());
  for (std::size_t i = 0; i < gamma.rows(); ++i) {
    double total = 0.0;
    for (double g : gamma.row(i)) total += g;
    const double psi_total = digamma(total);
    for (std::size_t g = 0; g < gamma.cols(); ++g) out(i, g) = digamma(gamma(i, g)) - psi_total;
  }
  return out;
}

std::vector<double> alpha_gradient(const Matrix& gamma, std::span<const double> alpha) {
  const std::size_t m = alpha.size();
  const double k = static_cast<double>(gamma.rows());
  const Matrix elog = expected_log_pi(gamma);
  const double psi_sum = digamma(std::accumulate(alpha.begin(), alpha.end(), 0.0));
  std::vector<double> g(m, 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    double s = 0.0;
    for (std::size_t i = 0; i < gamma.rows(); ++i) s += elog(i, a);
    g[a] = s - k * digamma(alpha[a]) + k * psi_sum;
  }
  return g;
}

}  // namespace scool
