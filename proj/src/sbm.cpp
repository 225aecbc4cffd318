#include "scool/sbm.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "scool/core_math.hpp"
#include "scool/errors.hpp"

namespace scool {
namespace {

Matrix block_logit(const Matrix& b) {
  Matrix out(b.rows(), b.cols());
  for (std::size_t g = 0; g < b.rows(); ++g) {
    for (std::size_t h = 0; h < b.cols(); ++h) {
      const double v = b(g, h);
      if (!(v > 0.0 && v < 1.0)) {
        throw InvariantError("block matrix entry (" + std::to_string(g) + "," + std::to_string(h) +
                             ") = " + std::to_string(v) + " is outside (0, 1)");
      }
      out(g, h) = safe_log(v) - safe_log(1.0 - v);
    }
  }
  return out;
}

void check_simplex_rows(const Matrix& m, const char* what) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double total = 0.0;
    for (double v : m.row(i)) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw InvariantError(std::string(what) + " row " + std::to_string(i) + " has an invalid entry");
      }
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw InvariantError(std::string(what) + " row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

}  // namespace

SbmState make_sbm_state(std::size_t clients, std::size_t memberships, const BlockPriorInit& init) {
  if (clients == 0 || memberships == 0) throw ConfigError("SBM state needs K >= 1 and M >= 1");
  if (!(init.alpha > 0.0)) throw ConfigError("initial alpha must be > 0");
  if (!(init.b_within > 0.0 && init.b_within < 1.0 && init.b_between > 0.0 && init.b_between < 1.0)) {
    throw ConfigError("initial block probabilities must lie in (0, 1)");
  }
  SbmState s;
  s.w = Matrix(clients, clients, 0.5);
  for (std::size_t i = 0; i < clients; ++i) s.w(i, i) = 1.0;
  s.alpha.assign(memberships, init.alpha);
  s.B = Matrix(memberships, memberships, init.b_between);
  for (std::size_t g = 0; g < memberships; ++g) s.B(g, g) = init.b_within;

  s.omega = Matrix(clients, memberships, 1.0 / static_cast<double>(memberships));
  if (init.membership_jitter > 0.0 && memberships > 1) {
    std::mt19937_64 rng(init.seed);
    std::gamma_distribution<double> unit_gamma(1.0, 1.0);
    const double mix = std::min(1.0, init.membership_jitter);
    for (std::size_t i = 0; i < clients; ++i) {
      std::vector<double> draw(memberships);
      double total = 0.0;
      for (double& d : draw) {
        d = unit_gamma(rng);
        total += d;
      }
      for (std::size_t g = 0; g < memberships; ++g) {
        s.omega(i, g) = (1.0 - mix) / static_cast<double>(memberships) + mix * draw[g] / total;
      }
    }
  }
  s.gamma = Matrix(clients, memberships);
  sbm_e_step_gamma(s);
  return s;
}

void validate(const SbmState& s) {
  const std::size_t k = s.clients();
  const std::size_t m = s.memberships();
  if (s.w.rows() != k || s.w.cols() != k || s.gamma.rows() != k || s.gamma.cols() != m ||
      s.alpha.size() != m || s.B.rows() != m || s.B.cols() != m) {
    throw InvariantError("SBM state has inconsistent shapes");
  }
  check_simplex_rows(s.omega, "Omega");
  for (double v : s.w.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvariantError("SBM w entry outside [0, 1]");
  }
  for (double v : s.gamma.data()) {
    if (!(v > 0.0)) throw InvariantError("gamma entry is not positive");
  }
  for (double v : s.alpha) {
    if (!(v >= kAlphaFloor)) throw InvariantError("alpha entry below its floor");
  }
  for (double v : s.B.data()) {
    if (!(v >= kBClamp && v <= 1.0 - kBClamp)) throw InvariantError("B entry outside its clamp range");
  }
}

void sbm_e_step_w(SbmState& s, const Matrix& loglik, const Mask& mask) {
  const std::size_t k = s.clients();
  const std::size_t m = s.memberships();
  if (loglik.rows() != k || mask.size() != k) throw InputError("sbm_e_step_w: inconsistent K");
  const Matrix logit_b = block_logit(s.B);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) {
        s.w(i, j) = 1.0;
        continue;
      }
      if (!mask(i, j)) {
        s.w(i, j) = 0.0;
        continue;
      }
      double prior = 0.0;
      for (std::size_t g = 0; g < m; ++g) {
        double inner = 0.0;
        for (std::size_t h = 0; h < m; ++h) inner += s.omega(j, h) * logit_b(g, h);
        prior += s.omega(i, g) * inner;
      }
      const double ll = loglik(i, j);
      if (!std::isfinite(ll)) throw InputError("sbm_e_step_w: non-finite log-likelihood on an allowed pair");
      s.w(i, j) = sigmoid_tempered(ll + prior, s.tau);
    }
  }
}

void sbm_e_step_gamma(SbmState& s) {
  for (std::size_t i = 0; i < s.clients(); ++i) {
    for (std::size_t g = 0; g < s.memberships(); ++g) s.gamma(i, g) = s.omega(i, g) + s.alpha[g];
  }
}

std::vector<double> sbm_omega_logits(const SbmState& s, const Mask& mask, std::size_t i) {
  const std::size_t k = s.clients();
  const std::size_t m = s.memberships();
  Matrix log_b(m, m);
  Matrix log_1mb(m, m);
  for (std::size_t g = 0; g < m; ++g) {
    for (std::size_t h = 0; h < m; ++h) {
      log_b(g, h) = safe_log(s.B(g, h));
      log_1mb(g, h) = safe_log(1.0 - s.B(g, h));
    }
  }
  double gamma_total = 0.0;
  for (double v : s.gamma.row(i)) gamma_total += v;
  const double psi_total = digamma(gamma_total);

  std::vector<double> logits(m);
  for (std::size_t a = 0; a < m; ++a) {
    double acc = digamma(s.gamma(i, a)) - psi_total;
    for (std::size_t j = 0; j < k; ++j) {
      if (is_edge_pair(mask, i, j)) {
        const double wij = s.w(i, j);
        for (std::size_t h = 0; h < m; ++h) {
          acc += s.omega(j, h) * (wij * log_b(a, h) + (1.0 - wij) * log_1mb(a, h));
        }
      }
      if (is_edge_pair(mask, j, i)) {
        const double wji = s.w(j, i);
        for (std::size_t h = 0; h < m; ++h) {
          acc += s.omega(j, h) * (wji * log_b(h, a) + (1.0 - wji) * log_1mb(h, a));
        }
      }
    }
    logits[a] = acc;
  }
  return logits;
}

std::size_t sbm_e_step_omega(SbmState& s, const Mask& mask, const SweepOptions& options) {
  const std::size_t k = s.clients();
  if (mask.size() != k) throw InputError("sbm_e_step_omega: inconsistent K");
  std::size_t sweeps = 0;
  while (sweeps < std::max<std::size_t>(1, options.max_sweeps)) {
    ++sweeps;
    double moved = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const std::vector<double> row = softmax_tempered(sbm_omega_logits(s, mask, i), 1.0);
      for (std::size_t a = 0; a < row.size(); ++a) {
        moved = std::max(moved, std::abs(row[a] - s.omega(i, a)));
        s.omega(i, a) = row[a];
      }
    }
    if (moved <= options.tolerance) break;
  }
  return sweeps;
}

std::size_t sbm_e_step(SbmState& s, const Matrix& loglik, const Mask& mask,
                       const EStepOptions& options) {
  std::size_t iterations = 0;
  while (iterations < std::max<std::size_t>(1, options.max_iterations)) {
    ++iterations;
    const Matrix w_before = s.w;
    const Matrix omega_before = s.omega;
    sbm_e_step_w(s, loglik, mask);
    sbm_e_step_omega(s, mask, {.max_sweeps = 1, .tolerance = 0.0});
    sbm_e_step_gamma(s);
    const double moved = std::max(max_abs_diff(w_before.data(), s.w.data()),
                                  max_abs_diff(omega_before.data(), s.omega.data()));
    if (moved <= options.tolerance) break;
  }
  // Finish on w so the returned graph is exact given the final memberships.
  sbm_e_step_w(s, loglik, mask);
  return iterations;
}

void sbm_m_step_alpha(SbmState& s) {
  if (!(s.eta2 > 0.0)) throw ConfigError("eta2 must be > 0");
  const std::vector<double> g = alpha_gradient(s.gamma, s.alpha);
  if (s.alpha_optimizer.options().kind == OptimizerKind::Adam) {
    std::vector<double> descent(g.size());
    for (std::size_t a = 0; a < g.size(); ++a) descent[a] = -g[a];
    s.alpha_optimizer.step(s.alpha, descent);
  } else {
    for (std::size_t a = 0; a < g.size(); ++a) s.alpha[a] += s.eta2 * g[a];
  }
  for (double& v : s.alpha) v = std::max(v, kAlphaFloor);
}

void sbm_m_step_B(SbmState& s, const Mask& mask, DegeneratePolicy policy) {
  const std::size_t k = s.clients();
  const std::size_t m = s.memberships();
  Matrix num(m, m);
  Matrix den(m, m);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (!is_edge_pair(mask, i, j)) continue;
      const double wij = s.w(i, j);
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
          const double prod = s.omega(i, a) * s.omega(j, b);
          num(a, b) += wij * prod;
          den(a, b) += prod;
        }
      }
    }
  }
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      if (den(a, b) < 1e-12) {
        if (policy == DegeneratePolicy::KeepPrevious) continue;
        throw DegenerateMembershipError("B(" + std::to_string(a) + "," + std::to_string(b) +
                                        ") has no membership mass to estimate from");
      }
      s.B(a, b) = std::clamp(num(a, b) / den(a, b), kBClamp, 1.0 - kBClamp);
    }
  }
}

}  // namespace scool
