#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "scool/attention.hpp"
#include "scool/elbo.hpp"
#include "scool/task_gen.hpp"

using namespace scool;

namespace {

struct Fixture {
  std::vector<LocalModel> models;
  std::vector<ClientData> clients;
  Mask mask;
};

Fixture small_fixture(std::uint64_t seed) {
  Fixture f;
  auto tasks = gen_noniid_sbm(4, 4, 2, 2, {.train = 8, .test = 8}, seed, {.dim = 5});
  f.clients = std::move(tasks.clients);
  f.mask = Mask::full(4);
  const auto arch = Architecture::softmax_regression(5, 2);
  const auto theta0 = random_parameters(arch, seed);
  for (std::size_t i = 0; i < 4; ++i) {
    f.models.emplace_back(arch, theta0);
    auto t = f.models.back().theta();
    for (std::size_t p = 0; p < t.size(); ++p) t[p] += 0.1 * std::sin(static_cast<double>(7 * i + p));
  }
  return f;
}

std::size_t argmax_row(const Matrix& m, std::size_t i) {
  const auto row = m.row(i);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

TEST(AttentionComputeP, EqualDeltasGiveUniformRows) {
  const Encoder enc{.input_dim = 3, .hidden_dim = 4, .embed_dim = 2};
  const auto phi = enc.init_parameters(1);
  const std::vector<std::vector<double>> thetas(4, {0.3, -0.2, 0.5});
  const std::vector<std::vector<double>> inits(4, {0.0, 0.0, 0.0});
  const Matrix p = attention_compute_p(enc, phi, thetas, inits, 1.0, Mask::full(4));
  for (double v : p.data()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(AttentionComputeP, OrthogonalDeltasHandCase) {
  // W1 = I, b1 = 0, W2 = I, b2 = 0: e_i = tanh(delta_i).
  const Encoder enc{.input_dim = 2, .hidden_dim = 2, .embed_dim = 2};
  const std::vector<double> phi{1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0};
  ASSERT_EQ(phi.size(), enc.parameter_count());
  const double a = 0.8;
  const std::vector<std::vector<double>> thetas{{a, 0.0}, {0.0, a}};
  const std::vector<std::vector<double>> inits(2, {0.0, 0.0});
  const Matrix p = attention_compute_p(enc, phi, thetas, inits, 1.0, Mask::full(2));
  const double t2 = std::tanh(a) * std::tanh(a);
  EXPECT_NEAR(p(0, 0), std::exp(t2) / (std::exp(t2) + 1.0), 1e-15);
  EXPECT_NEAR(p(0, 1), 1.0 / (std::exp(t2) + 1.0), 1e-15);
}

TEST(AttentionComputeP, RowsOnSimplexAndMasked) {
  oracle::Rng rng(4);
  const Encoder enc{.input_dim = 4, .hidden_dim = 5, .embed_dim = 3};
  const auto phi = enc.init_parameters(9);
  const Mask mask = oracle::random_mask(rng, 6, 0.4);
  std::vector<std::vector<double>> thetas(6, std::vector<double>(4));
  for (auto& t : thetas)
    for (double& v : t) v = oracle::uniform(rng, -1.0, 1.0);
  const std::vector<std::vector<double>> inits(6, std::vector<double>(4, 0.0));
  const Matrix p = attention_compute_p(enc, phi, thetas, inits, 0.7, mask);
  for (std::size_t i = 0; i < 6; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      if (!mask(i, j)) EXPECT_EQ(p(i, j), 0.0);
      total += p(i, j);
    }
    EXPECT_NEAR(total, 1.0, 1e-14);
  }
}

TEST(AttentionComputeP, TemperatureKeepsArgmax) {
  oracle::Rng rng(8);
  const Encoder enc{.input_dim = 4, .hidden_dim = 5, .embed_dim = 3};
  const auto phi = enc.init_parameters(2);
  std::vector<std::vector<double>> thetas(5, std::vector<double>(4));
  for (auto& t : thetas)
    for (double& v : t) v = oracle::uniform(rng, -1.0, 1.0);
  const std::vector<std::vector<double>> inits(5, std::vector<double>(4, 0.0));
  const Matrix cold = attention_compute_p(enc, phi, thetas, inits, 0.2, Mask::full(5));
  const Matrix hot = attention_compute_p(enc, phi, thetas, inits, 5.0, Mask::full(5));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(argmax_row(cold, i), argmax_row(hot, i));
}

TEST(AttentionEStepW, ZeroLoglikReturnsPrior) {
  auto inst = oracle::random_attention(3, 5);
  inst.state.tau = 1.0;
  attention_e_step_w(inst.state, Matrix(5, 5), inst.mask);
  for (std::size_t k = 0; k < 25; ++k) EXPECT_NEAR(inst.state.w.data()[k], inst.state.p.data()[k], 1e-15);
}

TEST(AttentionEStepW, UniformPriorGivesLoglikSoftmax) {
  auto inst = oracle::random_attention(6, 4);
  inst.mask = Mask::full(4);
  inst.state.p = Matrix(4, 4, 0.25);
  inst.state.tau = 1.3;
  attention_e_step_w(inst.state, inst.loglik, inst.mask);
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> logits(4);
    for (std::size_t j = 0; j < 4; ++j) logits[j] = i == j ? 0.0 : inst.loglik(i, j);
    double z = 0.0;
    for (double l : logits) z += std::exp(l / 1.3);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(inst.state.w(i, j), std::exp(logits[j] / 1.3) / z, 1e-14);
  }
}

TEST(AttentionEStepW, IsRowwiseKktPoint) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_LT(oracle::attention_w_residual(oracle::random_attention(seed, 3 + seed % 4)), 1e-4) << seed;
    EXPECT_GE(oracle::attention_worst_step(oracle::random_attention(seed, 3 + seed % 4)), -1e-8) << seed;
  }
}

TEST(AttentionGradients, MatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_LT(oracle::attention_phi_gradient_error(seed), 1e-4) << seed;
    EXPECT_LT(oracle::attention_theta_gradient_error(seed), 1e-4) << seed;
  }
}

TEST(AttentionPhiGradient, VanishesWhenWEqualsP) {
  oracle::Rng rng(12);
  const Encoder enc{.input_dim = 3, .hidden_dim = 4, .embed_dim = 3};
  const auto phi = enc.init_parameters(5);
  std::vector<std::vector<double>> thetas(5, std::vector<double>(3));
  for (auto& t : thetas)
    for (double& v : t) v = oracle::uniform(rng, -1.0, 1.0);
  const std::vector<std::vector<double>> inits(5, std::vector<double>(3, 0.1));
  const Mask mask = oracle::random_mask(rng, 5, 0.5);
  const Matrix p = attention_compute_p(enc, phi, thetas, inits, 0.9, mask);
  for (double g : attention_phi_gradient(enc, phi, thetas, inits, p, 0.9, mask)) EXPECT_NEAR(g, 0.0, 1e-10);
}

TEST(AttentionMStepPhi, FrozenWPullsPTowardsW) {
  Fixture f = small_fixture(3);
  AttentionState s = make_attention_state(4, f.models[0].theta().size(), f.mask, {.seed = 3});
  s.eta2 = 0.05;
  oracle::Rng rng(1);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto row = oracle::random_simplex(rng, 4);
    std::copy(row.begin(), row.end(), s.w.row(i).begin());
  }
  const auto thetas = thetas_of(f.models);
  const auto inits = init_thetas_of(f.models);
  auto objective = [&] { return attention_objective(s.encoder, s.phi, thetas, inits, s.w, s.score_tau, f.mask); };
  const double start = objective();
  double previous = start;
  for (int step = 1; step <= 200; ++step) {
    attention_m_step_phi(s, f.models, f.mask);
    if (step % 20 == 0) {
      const double now = objective();
      EXPECT_GT(now, previous) << step;
      previous = now;
    }
  }
  EXPECT_GT(previous, start);
}

TEST(AttentionMStepTheta, DecoupledReducesToLocalSgd) {
  Fixture f = small_fixture(5);
  AttentionState s = make_attention_state(4, f.models[0].theta().size(), f.mask, {.seed = 1});
  s.coupling = false;
  s.lambda = 0.0;
  s.w = Matrix::identity(4);
  const MStepOptions opts{.lambda = 0.0, .eta1 = 0.2, .local_steps = 3, .batch_size = 3, .seed = 4, .round = 2};
  auto coupled = f.models;
  attention_m_step_theta(coupled, f.clients, s, f.mask, opts);
  auto local = f.models;
  for (std::size_t i = 0; i < 4; ++i) local_sgd(local[i], f.clients, i, opts);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_TRUE(std::equal(coupled[i].theta().begin(), coupled[i].theta().end(), local[i].theta().begin()));
  }
}
