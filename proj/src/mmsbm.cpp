#include "scool/mmsbm.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "scool/core_math.hpp"
#include "scool/errors.hpp"

namespace scool {
namespace {

struct BlockLogs {
  Matrix log_b;
  Matrix log_1mb;
};

BlockLogs block_logs(const Matrix& b) {
  BlockLogs out{Matrix(b.rows(), b.cols()), Matrix(b.rows(), b.cols())};
  for (std::size_t g = 0; g < b.rows(); ++g) {
    for (std::size_t h = 0; h < b.cols(); ++h) {
      const double v = b(g, h);
      if (!(v > 0.0 && v < 1.0)) throw InvariantError("block matrix entry outside (0, 1)");
      out.log_b(g, h) = safe_log(v);
      out.log_1mb(g, h) = safe_log(1.0 - v);
    }
  }
  return out;
}

double max_change(std::span<const double> a, std::span<const double> b) { return max_abs_diff(a, b); }

}  // namespace

MmsbmState make_mmsbm_state(std::size_t clients, std::size_t memberships, const Mask& mask,
                            const BlockPriorInit& init) {
  // Reuse the SBM initialiser for per-client membership seeds.
  const SbmState seed_state = make_sbm_state(clients, memberships, init);
  MmsbmState s;
  s.w = seed_state.w;
  s.alpha = seed_state.alpha;
  s.B = seed_state.B;
  const double uniform = 1.0 / static_cast<double>(memberships);
  s.phi_send = PairTensor(clients, memberships, uniform);
  s.phi_recv = PairTensor(clients, memberships, uniform);
  for (std::size_t i = 0; i < clients; ++i) {
    for (std::size_t j = 0; j < clients; ++j) {
      if (!is_edge_pair(mask, i, j)) continue;
      auto send = s.phi_send.at(i, j);
      auto recv = s.phi_recv.at(i, j);
      for (std::size_t g = 0; g < memberships; ++g) {
        send[g] = seed_state.omega(i, g);
        recv[g] = seed_state.omega(j, g);
      }
    }
  }
  s.gamma = Matrix(clients, memberships);
  mmsbm_update_gamma(s, mask);
  return s;
}

void validate(const MmsbmState& s) {
  const std::size_t k = s.clients();
  const std::size_t m = s.memberships();
  if (s.gamma.rows() != k || s.gamma.cols() != m || s.B.rows() != m || s.phi_send.clients() != k ||
      s.phi_recv.clients() != k || s.phi_send.slots() != m || s.phi_recv.slots() != m) {
    throw InvariantError("MMSBM state has inconsistent shapes");
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      for (const auto& row : {s.phi_send.at(i, j), s.phi_recv.at(i, j)}) {
        double total = 0.0;
        for (double v : row) {
          if (!(v >= 0.0)) throw InvariantError("membership indicator entry is negative");
          total += v;
        }
        if (std::abs(total - 1.0) > 1e-9) throw InvariantError("membership indicator is off the simplex");
      }
    }
  }
  for (double v : s.w.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvariantError("MMSBM w entry outside [0, 1]");
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

void mmsbm_update_w(MmsbmState& s, const Matrix& loglik, const Mask& mask) {
  const std::size_t k = s.clients();
  const std::size_t m = s.memberships();
  const BlockLogs logs = block_logs(s.B);
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
      const auto send = s.phi_send.at(i, j);
      const auto recv = s.phi_recv.at(i, j);
      double prior = 0.0;
      for (std::size_t g = 0; g < m; ++g) {
        for (std::size_t h = 0; h < m; ++h) {
          prior += send[g] * recv[h] * (logs.log_b(g, h) - logs.log_1mb(g, h));
        }
      }
      const double ll = loglik(i, j);
      if (!std::isfinite(ll)) throw InputError("mmsbm_update_w: non-finite log-likelihood on an allowed pair");
      s.w(i, j) = sigmoid_tempered(ll + prior, s.tau);
    }
  }
}

void mmsbm_update_gamma(MmsbmState& s, const Mask& mask) {
  const std::size_t k = s.clients();
  const std::size_t m = s.memberships();
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t g = 0; g < m; ++g) s.gamma(i, g) = s.alpha[g];
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (!is_edge_pair(mask, i, j)) continue;
      const auto send = s.phi_send.at(i, j);
      const auto recv = s.phi_recv.at(i, j);
      for (std::size_t g = 0; g < m; ++g) {
        s.gamma(i, g) += send[g];
        s.gamma(j, g) += recv[g];
      }
    }
  }
}

void mmsbm_update_phi_send(MmsbmState& s, const Mask& mask) {
  const std::size_t k = s.clients();
  const std::size_t m = s.memberships();
  const BlockLogs logs = block_logs(s.B);
  const Matrix elog = expected_log_pi(s.gamma);
  std::vector<double> logits(m);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (!is_edge_pair(mask, i, j)) continue;
      const double wij = s.w(i, j);
      const auto recv = s.phi_recv.at(i, j);
      for (std::size_t a = 0; a < m; ++a) {
        double acc = elog(i, a);
        for (std::size_t h = 0; h < m; ++h) {
          acc += recv[h] * (wij * logs.log_b(a, h) + (1.0 - wij) * logs.log_1mb(a, h));
        }
        logits[a] = acc;
      }
      const auto row = softmax_tempered(logits, 1.0);
      std::copy(row.begin(), row.end(), s.phi_send.at(i, j).begin());
    }
  }
}

void mmsbm_update_phi_recv(MmsbmState& s, const Mask& mask) {
  const std::size_t k = s.clients();
  const std::size_t m = s.memberships();
  const BlockLogs logs = block_logs(s.B);
  const Matrix elog = expected_log_pi(s.gamma);
  std::vector<double> logits(m);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (!is_edge_pair(mask, i, j)) continue;
      const double wij = s.w(i, j);
      const auto send = s.phi_send.at(i, j);
      for (std::size_t b = 0; b < m; ++b) {
        double acc = elog(j, b);
        for (std::size_t g = 0; g < m; ++g) {
          acc += send[g] * (wij * logs.log_b(g, b) + (1.0 - wij) * logs.log_1mb(g, b));
        }
        logits[b] = acc;
      }
      const auto row = softmax_tempered(logits, 1.0);
      std::copy(row.begin(), row.end(), s.phi_recv.at(i, j).begin());
    }
  }
}

std::size_t mmsbm_e_step(MmsbmState& s, const Matrix& loglik, const Mask& mask,
                         const EStepOptions& options) {
  std::size_t iterations = 0;
  while (iterations < std::max<std::size_t>(1, options.max_iterations)) {
    ++iterations;
    const MmsbmState before = s;
    mmsbm_update_w(s, loglik, mask);
    mmsbm_update_gamma(s, mask);
    mmsbm_update_phi_send(s, mask);
    mmsbm_update_phi_recv(s, mask);
    // Leave gamma consistent with the final indicators.
    mmsbm_update_gamma(s, mask);
    double moved = max_change(before.w.data(), s.w.data());
    moved = std::max(moved, max_change(before.gamma.data(), s.gamma.data()));
    for (std::size_t i = 0; i < s.clients(); ++i) {
      for (std::size_t j = 0; j < s.clients(); ++j) {
        moved = std::max(moved, max_change(before.phi_send.at(i, j), s.phi_send.at(i, j)));
        moved = std::max(moved, max_change(before.phi_recv.at(i, j), s.phi_recv.at(i, j)));
      }
    }
    if (moved <= options.tolerance) break;
  }
  return iterations;
}

void mmsbm_m_step_alpha(MmsbmState& s) {
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

void mmsbm_m_step_B(MmsbmState& s, const Mask& mask, DegeneratePolicy policy) {
  const std::size_t k = s.clients();
  const std::size_t m = s.memberships();
  Matrix num(m, m);
  Matrix den(m, m);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (!is_edge_pair(mask, i, j)) continue;
      const auto send = s.phi_send.at(i, j);
      const auto recv = s.phi_recv.at(i, j);
      for (std::size_t g = 0; g < m; ++g) {
        for (std::size_t h = 0; h < m; ++h) {
          const double prod = send[g] * recv[h];
          num(g, h) += s.w(i, j) * prod;
          den(g, h) += prod;
        }
      }
    }
  }
  for (std::size_t g = 0; g < m; ++g) {
    for (std::size_t h = 0; h < m; ++h) {
      if (den(g, h) < 1e-12) {
        if (policy == DegeneratePolicy::KeepPrevious) continue;
        throw DegenerateMembershipError("B(" + std::to_string(g) + "," + std::to_string(h) +
                                        ") has no membership mass to estimate from");
      }
      s.B(g, h) = std::clamp(num(g, h) / den(g, h), kBClamp, 1.0 - kBClamp);
    }
  }
}

void mmsbm_m_step(MmsbmState& s, std::vector<LocalModel>& models, std::span<const ClientData> clients,
                  const Mask& mask, const MStepOptions& options, DegeneratePolicy policy) {
  MStepOptions opts = options;
  opts.lambda = s.lambda;
  cooperative_m_step(models, clients, s.w, mask, opts);
  mmsbm_m_step_alpha(s);
  mmsbm_m_step_B(s, mask, policy);
}

}  // namespace scool
