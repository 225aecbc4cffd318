#include "scool/simulation.hpp"

#include <string>

#include "scool/errors.hpp"
#include "scool/parallel.hpp"

namespace scool {

std::string to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::Dirac: return "dirac";
    case PriorKind::Sbm: return "sbm";
    case PriorKind::Attention: return "attention";
    case PriorKind::Mmsbm: return "mmsbm";
    case PriorKind::LocalOnly: return "local-only";
  }
  return "unknown";
}

Simulation::Simulation(SimulationConfig config, std::vector<LocalModel> models,
                       std::vector<ClientData> clients, Mask mask)
    : config_(std::move(config)),
      models_(std::move(models)),
      clients_(std::move(clients)),
      mask_(std::move(mask)),
      sparsifier_(config_.sparsify_keep, config_.sparsify_round) {
  const std::size_t k = models_.size();
  if (k == 0 || clients_.size() != k || mask_.size() != k) {
    throw ConfigError("simulation: models, datasets and topology disagree on K");
  }
  if (!(config_.tau > 0.0)) throw ConfigError("simulation: tau must be > 0");
  if (!(config_.lambda >= 0.0)) throw ConfigError("simulation: lambda must be >= 0");
  if (!(config_.eta2 > 0.0)) throw ConfigError("simulation: eta2 must be > 0");
  const std::size_t dim = models_.front().theta().size();
  ledger_.per_client_units.assign(k, 0.0);

  OptimizerOptions vopt = config_.variational_optimizer;
  vopt.learning_rate = config_.eta2;
  switch (config_.prior) {
    case PriorKind::Sbm: {
      SbmState s = make_sbm_state(k, config_.memberships, config_.block_init);
      s.lambda = config_.lambda;
      s.tau = config_.tau;
      s.eta2 = config_.eta2;
      s.alpha_optimizer = Optimizer(vopt);
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          if (i != j && !mask_(i, j)) s.w(i, j) = 0.0;
        }
      }
      sbm_ = std::move(s);
      break;
    }
    case PriorKind::Mmsbm: {
      MmsbmState s = make_mmsbm_state(k, config_.memberships, mask_, config_.block_init);
      s.lambda = config_.lambda;
      s.tau = config_.tau;
      s.eta2 = config_.eta2;
      s.alpha_optimizer = Optimizer(vopt);
      mmsbm_ = std::move(s);
      break;
    }
    case PriorKind::Attention: {
      AttentionState s = make_attention_state(k, dim, mask_, config_.attention_init);
      s.lambda = config_.lambda;
      s.tau = config_.tau;
      s.eta2 = config_.eta2;
      s.score_tau = config_.score_tau;
      s.coupling = config_.attention_coupling;
      s.phi_optimizer = Optimizer(vopt);
      attention_ = std::move(s);
      break;
    }
    case PriorKind::Dirac: {
      DiracState s;
      s.w = config_.dirac_w.empty() ? metropolis_weights(mask_) : config_.dirac_w;
      s.alpha_lr = config_.mstep.eta1;
      validate(s, mask_);
      dirac_ = std::move(s);
      break;
    }
    case PriorKind::LocalOnly:
      break;
  }
}

Matrix Simulation::graph() const {
  if (sbm_) return sbm_->w;
  if (mmsbm_) return mmsbm_->w;
  if (attention_) return attention_->w;
  if (dirac_) return dirac_->w;
  return Matrix::identity(models_.size());
}

void Simulation::warm_up(std::size_t steps) {
  if (steps == 0) return;
  MStepOptions opts = config_.mstep;
  opts.local_steps = steps;
  opts.batch_size = 0;
  opts.lambda = config_.lambda;
  opts.round = 0;
  parallel_for(models_.size(), [&](std::size_t i) { local_sgd(models_[i], clients_, i, opts); });
}

RoundResult Simulation::run_round() {
  const int round = completed_ + 1;
  RoundResult result;
  result.round = round;
  MStepOptions opts = config_.mstep;
  opts.round = round;
  const std::size_t k = models_.size();
  const std::size_t dim = models_.front().theta().size();
  const BatchPlan plan(clients_, opts);
  ExchangeKind exchange = ExchangeKind::Cooperative;

  try {
    switch (config_.prior) {
      case PriorKind::Sbm: {
        SbmState& s = *sbm_;
        const Matrix loglik = compute_loglik(models_, clients_, mask_);
        sbm_e_step(s, loglik, mask_, config_.estep);
        if (config_.compute_elbo) result.elbo = sbm_elbo(s, loglik, mask_, std::span<const LocalModel>(models_));
        opts.lambda = s.lambda;
        cooperative_m_step(models_, clients_, s.w, mask_, opts);
        sbm_m_step_alpha(s);
        sbm_m_step_B(s, mask_, DegeneratePolicy::KeepPrevious);
        break;
      }
      case PriorKind::Mmsbm: {
        MmsbmState& s = *mmsbm_;
        const Matrix loglik = compute_loglik(models_, clients_, mask_);
        mmsbm_e_step(s, loglik, mask_, config_.estep);
        if (config_.compute_elbo) result.elbo = mmsbm_elbo(s, loglik, mask_, std::span<const LocalModel>(models_));
        mmsbm_m_step(s, models_, clients_, mask_, opts, DegeneratePolicy::KeepPrevious);
        break;
      }
      case PriorKind::Attention: {
        AttentionState& s = *attention_;
        const Matrix loglik = compute_loglik(models_, clients_, mask_);
        s.p = attention_compute_p(models_, s.encoder, s.phi, s.score_tau, mask_);
        attention_e_step_w(s, loglik, mask_);
        if (config_.compute_elbo) {
          result.elbo = attention_elbo(s, loglik, mask_, std::span<const LocalModel>(models_));
        }
        attention_m_step_theta(models_, clients_, s, mask_, opts);
        attention_m_step_phi(s, models_, mask_);
        break;
      }
      case PriorKind::Dirac: {
        const DiracState& s = *dirac_;
        for (std::size_t step = 0; step < plan.steps(); ++step) {
          dirac_map_step(models_, s.w, s.lambda(), s.alpha_lr, clients_, plan, step);
        }
        exchange = ExchangeKind::ModelAveraging;
        break;
      }
      case PriorKind::LocalOnly: {
        opts.lambda = config_.lambda;
        for (std::size_t i = 0; i < k; ++i) local_sgd(models_[i], clients_, i, opts);
        exchange = ExchangeKind::None;
        break;
      }
    }
  } catch (const Error& e) {
    const std::string context = "round " + std::to_string(round) + ": " + e.what();
    if (dynamic_cast<const DivergenceError*>(&e)) throw DivergenceError(context);
    if (dynamic_cast<const ConfigError*>(&e)) throw ConfigError(context);
    throw InvariantError(context);
  }

  account_exchange(ledger_, mask_, opts.grad_mode, k, dim, plan.steps(), exchange, round);
  result.traffic = ledger_.rounds.back();
  completed_ = round;

  if (sparsifier_.enabled() && exchange == ExchangeKind::Cooperative) {
    result.sparsified = sparsifier_.maybe_apply(graph(), mask_, completed_);
    if (result.sparsified) {
      // Pruned pairs leave the model; keep the states consistent with the mask.
      if (sbm_) {
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j)
            if (!mask_(i, j)) sbm_->w(i, j) = 0.0;
      }
      if (mmsbm_) {
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j)
            if (!mask_(i, j)) mmsbm_->w(i, j) = 0.0;
      }
      if (attention_) {
        attention_->p = attention_compute_p(models_, attention_->encoder, attention_->phi, attention_->score_tau, mask_);
        const Matrix loglik = compute_loglik(models_, clients_, mask_);
        attention_e_step_w(*attention_, loglik, mask_);
      }
    }
  }
  return result;
}

}  // namespace scool
