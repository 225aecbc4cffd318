#include "scool/elbo.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "scool/core_math.hpp"
#include "scool/errors.hpp"

namespace scool {

namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

double sum_sq(std::span<const LocalModel> models) {
  double s = 0.0;
  for (const auto& m : models) s += squared_norm(m.theta());
  return s;
}

double likelihood_term(const Matrix& w, const Matrix& loglik, const Mask& mask) {
  const std::size_t k = w.rows();
  if (loglik.rows() != k || loglik.cols() != k || mask.size() != k) {
    throw InputError("elbo: loglik / mask do not match K");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    s += loglik(i, i);
    for (std::size_t j = 0; j < k; ++j) {
      if (is_edge_pair(mask, i, j)) s += w(i, j) * loglik(i, j);
    }
  }
  return s;
}

double bernoulli_entropy_sum(const Matrix& w, const Mask& mask) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) {
      if (is_edge_pair(mask, i, j)) s += bernoulli_entropy(w(i, j));
    }
  }
  return s;
}

// sum_i [log Gamma(sum alpha) - sum log Gamma(alpha) + sum (alpha-1) Elogpi]
//   - sum_i [log Gamma(sum gamma_i) - sum log Gamma(gamma_i) + sum (gamma_i-1) Elogpi]
double dirichlet_term(const Matrix& gamma, std::span<const double> alpha, const Matrix& elog) {
  const double alpha_sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  double lg_alpha = 0.0;
  for (double a : alpha) lg_alpha += log_gamma(a);
  double s = 0.0;
  for (std::size_t i = 0; i < gamma.rows(); ++i) {
    double gamma_sum = 0.0;
    double lg_gamma = 0.0;
    double cross = 0.0;
    for (std::size_t g = 0; g < gamma.cols(); ++g) {
      gamma_sum += gamma(i, g);
      lg_gamma += log_gamma(gamma(i, g));
      cross += (alpha[g] - gamma(i, g)) * elog(i, g);
    }
    s += log_gamma(alpha_sum) - lg_alpha - log_gamma(gamma_sum) + lg_gamma + cross;
  }
  return s;
}

void finish(ElboBreakdown& b) { b.total = b.sum_of_terms(); }

}  // namespace

double bernoulli_entropy(double x) { return -xlogx(x) - xlogx(1.0 - x); }

ElboBreakdown sbm_elbo(const SbmState& s, const Matrix& loglik, const Mask& mask, double theta_sq_sum) {
  validate(s);
  const std::size_t k = s.clients();
  const std::size_t m = s.memberships();
  ElboBreakdown b;
  b.likelihood = likelihood_term(s.w, loglik, mask);
  b.model_prior = -0.5 * s.lambda * theta_sq_sum;

  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (!is_edge_pair(mask, i, j)) continue;
      const double wij = s.w(i, j);
      for (std::size_t g = 0; g < m; ++g) {
        for (std::size_t h = 0; h < m; ++h) {
          const double bgh = s.B(g, h);
          b.edge += s.omega(i, g) * s.omega(j, h) * (wij * safe_log(bgh) + (1.0 - wij) * safe_log(1.0 - bgh));
        }
      }
    }
  }
  const Matrix elog = expected_log_pi(s.gamma);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t g = 0; g < m; ++g) {
      b.membership += s.omega(i, g) * elog(i, g);
      b.entropy_membership -= xlogx(s.omega(i, g));
    }
  }
  b.dirichlet = dirichlet_term(s.gamma, s.alpha, elog);
  b.entropy_w = s.tau * bernoulli_entropy_sum(s.w, mask);
  finish(b);
  return b;
}

ElboBreakdown sbm_elbo(const SbmState& s, const Matrix& loglik, const Mask& mask,
                       std::span<const LocalModel> models) {
  return sbm_elbo(s, loglik, mask, sum_sq(models));
}

ElboBreakdown mmsbm_elbo(const MmsbmState& s, const Matrix& loglik, const Mask& mask, double theta_sq_sum) {
  validate(s);
  const std::size_t k = s.clients();
  const std::size_t m = s.memberships();
  ElboBreakdown b;
  b.likelihood = likelihood_term(s.w, loglik, mask);
  b.model_prior = -0.5 * s.lambda * theta_sq_sum;
  const Matrix elog = expected_log_pi(s.gamma);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (!is_edge_pair(mask, i, j)) continue;
      const double wij = s.w(i, j);
      const auto send = s.phi_send.at(i, j);
      const auto recv = s.phi_recv.at(i, j);
      for (std::size_t g = 0; g < m; ++g) {
        for (std::size_t h = 0; h < m; ++h) {
          const double bgh = s.B(g, h);
          b.edge += send[g] * recv[h] * (wij * safe_log(bgh) + (1.0 - wij) * safe_log(1.0 - bgh));
        }
        b.membership += send[g] * elog(i, g) + recv[g] * elog(j, g);
        b.entropy_membership -= xlogx(send[g]) + xlogx(recv[g]);
      }
    }
  }
  b.dirichlet = dirichlet_term(s.gamma, s.alpha, elog);
  b.entropy_w = s.tau * bernoulli_entropy_sum(s.w, mask);
  finish(b);
  return b;
}

ElboBreakdown mmsbm_elbo(const MmsbmState& s, const Matrix& loglik, const Mask& mask,
                         std::span<const LocalModel> models) {
  return mmsbm_elbo(s, loglik, mask, sum_sq(models));
}

ElboBreakdown attention_elbo(const AttentionState& s, const Matrix& loglik, const Mask& mask,
                             double theta_sq_sum) {
  validate(s);
  const std::size_t k = s.clients();
  for (std::size_t i = 0; i < k; ++i) {
    double wsum = 0.0;
    double psum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (!mask(i, j)) continue;
      if (!(s.w(i, j) >= 0.0) || !(s.p(i, j) >= 0.0)) {
        throw InvariantError("attention row " + std::to_string(i) + " has a negative weight");
      }
      wsum += s.w(i, j);
      psum += s.p(i, j);
    }
    if (std::abs(wsum - 1.0) > 1e-9 || std::abs(psum - 1.0) > 1e-9) {
      throw InvariantError("attention row " + std::to_string(i) + " is not on the simplex");
    }
  }
  ElboBreakdown b;
  b.likelihood = likelihood_term(s.w, loglik, mask);
  b.model_prior = -0.5 * s.lambda * theta_sq_sum;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (!mask(i, j)) continue;
      const double wij = s.w(i, j);
      if (wij > 0.0) b.edge += wij * safe_log(s.p(i, j));
      b.entropy_w -= s.tau * xlogx(wij);
    }
  }
  finish(b);
  return b;
}

ElboBreakdown attention_elbo(const AttentionState& s, const Matrix& loglik, const Mask& mask,
                             std::span<const LocalModel> models) {
  return attention_elbo(s, loglik, mask, sum_sq(models));
}

}  // namespace scool
