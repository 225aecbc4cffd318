#include "scool/attention.hpp"

#include <cmath>
#include <random>
#include <string>

#include "scool/core_math.hpp"
#include "scool/errors.hpp"
#include "scool/parallel.hpp"

namespace scool {

namespace {

struct EncoderView {
  const double* w1;
  const double* b1;
  const double* w2;
  const double* b2;
};

EncoderView view(const Encoder& enc, std::span<const double> phi) {
  const std::size_t h = enc.hidden_dim, p = enc.input_dim, e = enc.embed_dim;
  const double* base = phi.data();
  return {base, base + h * p, base + h * p + h, base + h * p + h + e * h};
}

void check_phi(const Encoder& enc, std::span<const double> phi) {
  if (phi.size() != enc.parameter_count()) {
    throw InputError("encoder parameter size " + std::to_string(phi.size()) + " != expected " +
                     std::to_string(enc.parameter_count()));
  }
}

std::vector<double> delta(std::span<const double> theta, std::span<const double> init) {
  std::vector<double> d(theta.size());
  for (std::size_t p = 0; p < d.size(); ++p) d[p] = theta[p] - init[p];
  return d;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// p from embeddings, masked entries 0.
Matrix p_from_embeddings(const Matrix& emb, double tau, const Mask& mask) {
  const std::size_t k = emb.rows();
  Matrix p(k, k);
  std::vector<double> logits;
  for (std::size_t i = 0; i < k; ++i) {
    logits.clear();
    for (std::size_t j = 0; j < k; ++j) {
      if (mask(i, j)) logits.push_back(dot(emb.row(i), emb.row(j)));
    }
    const auto probs = softmax_tempered(logits, tau);
    std::size_t n = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (mask(i, j)) p(i, j) = probs[n++];
    }
  }
  return p;
}

// c_ij = dJ/ds_ij = w_ij - p_ij sum_l w_il over allowed pairs.
Matrix score_sensitivity(const Matrix& w, const Matrix& p, const Mask& mask) {
  const std::size_t k = w.rows();
  Matrix c(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (mask(i, j)) total += w(i, j);
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (mask(i, j)) c(i, j) = w(i, j) - p(i, j) * total;
    }
  }
  return c;
}

void check_inputs(std::span<const std::vector<double>> thetas,
                  std::span<const std::vector<double>> init_thetas, const Matrix& w, const Mask& mask) {
  const std::size_t k = thetas.size();
  if (init_thetas.size() != k || w.rows() != k || w.cols() != k || mask.size() != k) {
    throw InputError("attention: inconsistent client counts");
  }
}

// Gradient of the row-i term with respect to e_i only: (1/tau)(sum_j c_ij e_j + c_ii e_i).
std::vector<double> row_embedding_gradient(const Matrix& emb, const Matrix& c, double tau,
                                           const Mask& mask, std::size_t i) {
  std::vector<double> g(emb.cols(), 0.0);
  for (std::size_t j = 0; j < emb.rows(); ++j) {
    if (!mask(i, j)) continue;
    const double cij = c(i, j) / tau;
    for (std::size_t d = 0; d < g.size(); ++d) g[d] += cij * emb(j, d);
  }
  const double cii = c(i, i) / tau;
  for (std::size_t d = 0; d < g.size(); ++d) g[d] += cii * emb(i, d);
  return g;
}

class AttentionCoupling final : public GradientCoupling {
 public:
  AttentionCoupling(const AttentionState& state, const Mask& mask,
                    std::vector<std::vector<double>> init_thetas)
      : state_(state), mask_(mask), init_(std::move(init_thetas)) {}

  void prepare(std::span<const std::vector<double>> thetas) override {
    thetas_.assign(thetas.begin(), thetas.end());
    emb_ = attention_embeddings(state_.encoder, state_.phi, thetas_, init_);
    const Matrix p = p_from_embeddings(emb_, state_.score_tau, mask_);
    c_ = score_sensitivity(state_.w, p, mask_);
  }

  void add(std::size_t client, std::span<double> grad) const override {
    const auto ge = row_embedding_gradient(emb_, c_, state_.score_tau, mask_, client);
    const auto x = delta(thetas_[client], init_[client]);
    std::vector<double> dx(x.size(), 0.0);
    state_.encoder.backprop(state_.phi, x, ge, {}, dx);
    // Ascent on sum_j w_ij log p_ij means descent along -dx.
    for (std::size_t p = 0; p < grad.size(); ++p) grad[p] -= dx[p];
  }

 private:
  const AttentionState& state_;
  const Mask& mask_;
  std::vector<std::vector<double>> init_;
  std::vector<std::vector<double>> thetas_;
  Matrix emb_;
  Matrix c_;
};

}  // namespace

std::size_t Encoder::parameter_count() const {
  return hidden_dim * input_dim + hidden_dim + embed_dim * hidden_dim + embed_dim;
}

std::vector<double> Encoder::init_parameters(std::uint64_t seed, double scale) const {
  std::vector<double> phi(parameter_count(), 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s1 = scale / std::sqrt(static_cast<double>(std::max<std::size_t>(1, input_dim)));
  const double s2 = scale / std::sqrt(static_cast<double>(std::max<std::size_t>(1, hidden_dim)));
  for (std::size_t k = 0; k < hidden_dim * input_dim; ++k) phi[k] = s1 * normal(rng);
  const std::size_t w2 = hidden_dim * input_dim + hidden_dim;
  for (std::size_t k = 0; k < embed_dim * hidden_dim; ++k) phi[w2 + k] = s2 * normal(rng);
  return phi;
}

void Encoder::embed(std::span<const double> phi, std::span<const double> x, std::span<double> out) const {
  check_phi(*this, phi);
  if (x.size() != input_dim || out.size() != embed_dim) throw InputError("encoder: dimension mismatch");
  const auto v = view(*this, phi);
  std::vector<double> h(hidden_dim);
  for (std::size_t r = 0; r < hidden_dim; ++r) {
    double a = v.b1[r];
    for (std::size_t c = 0; c < input_dim; ++c) a += v.w1[r * input_dim + c] * x[c];
    h[r] = std::tanh(a);
  }
  for (std::size_t r = 0; r < embed_dim; ++r) {
    double a = v.b2[r];
    for (std::size_t c = 0; c < hidden_dim; ++c) a += v.w2[r * hidden_dim + c] * h[c];
    out[r] = a;
  }
}

void Encoder::backprop(std::span<const double> phi, std::span<const double> x,
                       std::span<const double> upstream, std::span<double> dphi,
                       std::span<double> dx) const {
  check_phi(*this, phi);
  if (x.size() != input_dim || upstream.size() != embed_dim) throw InputError("encoder: dimension mismatch");
  const auto v = view(*this, phi);
  std::vector<double> h(hidden_dim);
  for (std::size_t r = 0; r < hidden_dim; ++r) {
    double a = v.b1[r];
    for (std::size_t c = 0; c < input_dim; ++c) a += v.w1[r * input_dim + c] * x[c];
    h[r] = std::tanh(a);
  }
  std::vector<double> da(hidden_dim, 0.0);
  for (std::size_t r = 0; r < embed_dim; ++r) {
    for (std::size_t c = 0; c < hidden_dim; ++c) da[c] += v.w2[r * hidden_dim + c] * upstream[r];
  }
  for (std::size_t c = 0; c < hidden_dim; ++c) da[c] *= 1.0 - h[c] * h[c];

  if (!dphi.empty()) {
    const std::size_t o_b1 = hidden_dim * input_dim;
    const std::size_t o_w2 = o_b1 + hidden_dim;
    const std::size_t o_b2 = o_w2 + embed_dim * hidden_dim;
    for (std::size_t r = 0; r < hidden_dim; ++r) {
      for (std::size_t c = 0; c < input_dim; ++c) dphi[r * input_dim + c] += da[r] * x[c];
      dphi[o_b1 + r] += da[r];
    }
    for (std::size_t r = 0; r < embed_dim; ++r) {
      for (std::size_t c = 0; c < hidden_dim; ++c) dphi[o_w2 + r * hidden_dim + c] += upstream[r] * h[c];
      dphi[o_b2 + r] += upstream[r];
    }
  }
  if (!dx.empty()) {
    for (std::size_t c = 0; c < input_dim; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < hidden_dim; ++r) s += v.w1[r * input_dim + c] * da[r];
      dx[c] = s;
    }
  }
}

AttentionState make_attention_state(std::size_t clients, std::size_t model_dim, const Mask& mask,
                                    const AttentionInit& init) {
  if (clients == 0 || mask.size() != clients) throw ConfigError("attention: inconsistent client count");
  if (init.hidden_dim == 0 || init.embed_dim == 0) throw ConfigError("attention: encoder dims must be > 0");
  AttentionState s;
  s.encoder = Encoder{model_dim, init.hidden_dim, init.embed_dim};
  s.phi = s.encoder.init_parameters(init.seed, init.scale);
  s.w = Matrix(clients, clients);
  s.p = Matrix(clients, clients);
  for (std::size_t i = 0; i < clients; ++i) {
    const double u = 1.0 / static_cast<double>(mask.neighbors(i) + 1);
    for (std::size_t j = 0; j < clients; ++j) {
      if (mask(i, j)) {
        s.w(i, j) = u;
        s.p(i, j) = u;
      }
    }
  }
  return s;
}

void validate(const AttentionState& s) {
  if (!(s.tau > 0.0)) throw ConfigError("attention: tau must be > 0");
  if (!(s.score_tau > 0.0)) throw ConfigError("attention: score temperature must be > 0");
  if (!(s.lambda >= 0.0)) throw ConfigError("attention: lambda must be >= 0");
  if (!(s.eta2 > 0.0)) throw ConfigError("attention: eta2 must be > 0");
  check_phi(s.encoder, s.phi);
  if (s.w.rows() != s.w.cols() || s.p.rows() != s.w.rows()) throw InputError("attention: w/p shape");
}

std::vector<std::vector<double>> thetas_of(std::span<const LocalModel> models) {
  std::vector<std::vector<double>> out;
  out.reserve(models.size());
  for (const auto& m : models) out.emplace_back(m.theta().begin(), m.theta().end());
  return out;
}

std::vector<std::vector<double>> init_thetas_of(std::span<const LocalModel> models) {
  std::vector<std::vector<double>> out;
  out.reserve(models.size());
  for (const auto& m : models) out.emplace_back(m.init_theta().begin(), m.init_theta().end());
  return out;
}

Matrix attention_embeddings(const Encoder& encoder, std::span<const double> phi,
                            std::span<const std::vector<double>> thetas,
                            std::span<const std::vector<double>> init_thetas) {
  if (thetas.size() != init_thetas.size()) throw InputError("attention: inconsistent client counts");
  Matrix emb(thetas.size(), encoder.embed_dim);
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    encoder.embed(phi, delta(thetas[i], init_thetas[i]), emb.row(i));
  }
  return emb;
}

Matrix attention_compute_p(const Encoder& encoder, std::span<const double> phi,
                           std::span<const std::vector<double>> thetas,
                           std::span<const std::vector<double>> init_thetas, double tau,
                           const Mask& mask) {
  if (mask.size() != thetas.size()) throw InputError("attention: mask size");
  return p_from_embeddings(attention_embeddings(encoder, phi, thetas, init_thetas), tau, mask);
}

Matrix attention_compute_p(std::span<const LocalModel> models, const Encoder& encoder,
                           std::span<const double> phi, double tau, const Mask& mask) {
  return attention_compute_p(encoder, phi, thetas_of(models), init_thetas_of(models), tau, mask);
}

void attention_e_step_w(AttentionState& state, const Matrix& loglik, const Mask& mask) {
  const std::size_t k = state.clients();
  if (loglik.rows() != k || mask.size() != k) throw InputError("attention e-step: inconsistent K");
  std::vector<double> logits;
  for (std::size_t i = 0; i < k; ++i) {
    logits.clear();
    for (std::size_t j = 0; j < k; ++j) {
      if (!mask(i, j)) continue;
      const double c = i == j ? 0.0 : loglik(i, j);
      logits.push_back(c + safe_log(state.p(i, j)));
    }
    if (logits.empty()) throw ConfigError("attention: row " + std::to_string(i) + " is fully masked");
    const auto row = softmax_tempered(logits, state.tau);
    std::size_t n = 0;
    for (std::size_t j = 0; j < k; ++j) state.w(i, j) = mask(i, j) ? row[n++] : 0.0;
  }
}

double attention_objective(const Encoder& encoder, std::span<const double> phi,
                           std::span<const std::vector<double>> thetas,
                           std::span<const std::vector<double>> init_thetas, const Matrix& w,
                           double tau, const Mask& mask) {
  check_inputs(thetas, init_thetas, w, mask);
  double total = 0.0;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    total += attention_row_objective(encoder, phi, thetas, init_thetas, w, tau, mask, i);
  }
  return total;
}

double attention_row_objective(const Encoder& encoder, std::span<const double> phi,
                               std::span<const std::vector<double>> thetas,
                               std::span<const std::vector<double>> init_thetas, const Matrix& w,
                               double tau, const Mask& mask, std::size_t i) {
  check_inputs(thetas, init_thetas, w, mask);
  const Matrix emb = attention_embeddings(encoder, phi, thetas, init_thetas);
  // Log-sum-exp over allowed scores, so log p stays exact for tiny p.
  double mx = -INFINITY;
  std::vector<double> s(thetas.size(), 0.0);
  for (std::size_t j = 0; j < thetas.size(); ++j) {
    if (!mask(i, j)) continue;
    s[j] = dot(emb.row(i), emb.row(j)) / tau;
    mx = std::max(mx, s[j]);
  }
  double z = 0.0;
  for (std::size_t j = 0; j < thetas.size(); ++j) {
    if (mask(i, j)) z += std::exp(s[j] - mx);
  }
  const double lse = mx + std::log(z);
  double total = 0.0;
  for (std::size_t j = 0; j < thetas.size(); ++j) {
    if (mask(i, j) && w(i, j) != 0.0) total += w(i, j) * (s[j] - lse);
  }
  return total;
}

std::vector<double> attention_phi_gradient(const Encoder& encoder, std::span<const double> phi,
                                           std::span<const std::vector<double>> thetas,
                                           std::span<const std::vector<double>> init_thetas,
                                           const Matrix& w, double tau, const Mask& mask) {
  check_inputs(thetas, init_thetas, w, mask);
  const std::size_t k = thetas.size();
  const Matrix emb = attention_embeddings(encoder, phi, thetas, init_thetas);
  const Matrix c = score_sensitivity(w, p_from_embeddings(emb, tau, mask), mask);
  std::vector<double> grad(phi.size(), 0.0);
  std::vector<double> ge(encoder.embed_dim);
  for (std::size_t a = 0; a < k; ++a) {
    // G_a = (1/tau)(sum_j c_aj e_j + sum_i c_ia e_i)
    std::fill(ge.begin(), ge.end(), 0.0);
    for (std::size_t b = 0; b < k; ++b) {
      const double coef = ((mask(a, b) ? c(a, b) : 0.0) + (mask(b, a) ? c(b, a) : 0.0)) / tau;
      if (coef == 0.0) continue;
      for (std::size_t d = 0; d < ge.size(); ++d) ge[d] += coef * emb(b, d);
    }
    encoder.backprop(phi, delta(thetas[a], init_thetas[a]), ge, grad, {});
  }
  return grad;
}

std::vector<double> attention_row_gradient(const Encoder& encoder, std::span<const double> phi,
                                           std::span<const std::vector<double>> thetas,
                                           std::span<const std::vector<double>> init_thetas,
                                           const Matrix& w, double tau, const Mask& mask,
                                           std::size_t i) {
  check_inputs(thetas, init_thetas, w, mask);
  const Matrix emb = attention_embeddings(encoder, phi, thetas, init_thetas);
  const Matrix c = score_sensitivity(w, p_from_embeddings(emb, tau, mask), mask);
  const auto ge = row_embedding_gradient(emb, c, tau, mask, i);
  std::vector<double> dx(thetas[i].size(), 0.0);
  encoder.backprop(phi, delta(thetas[i], init_thetas[i]), ge, {}, dx);
  return dx;
}

void attention_m_step_theta(std::vector<LocalModel>& models, std::span<const ClientData> clients,
                            const AttentionState& state, const Mask& mask, const MStepOptions& options) {
  MStepOptions opts = options;
  opts.lambda = state.lambda;
  if (!state.coupling) {
    cooperative_m_step(models, clients, state.w, mask, opts);
    return;
  }
  AttentionCoupling coupling(state, mask, init_thetas_of(models));
  cooperative_m_step(models, clients, state.w, mask, opts, &coupling);
}

void attention_m_step_phi(AttentionState& state, std::span<const LocalModel> models, const Mask& mask) {
  const auto thetas = thetas_of(models);
  const auto inits = init_thetas_of(models);
  auto grad = attention_phi_gradient(state.encoder, state.phi, thetas, inits, state.w, state.score_tau, mask);
  check_finite(grad, "encoder gradient", 0, 0);
  if (state.phi_optimizer.options().kind == OptimizerKind::Plain) {
    for (std::size_t p = 0; p < grad.size(); ++p) state.phi[p] += state.eta2 * grad[p];
  } else {
    for (double& g : grad) g = -g;
    state.phi_optimizer.step(state.phi, grad);
  }
  check_finite(state.phi, "encoder parameters", 0, 0);
  state.p = attention_compute_p(state.encoder, state.phi, thetas, inits, state.score_tau, mask);
}

}  // namespace scool
