#include "scool/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "scool/errors.hpp"
#include "scool/seeding.hpp"
#include "scool/task_gen.hpp"

namespace scool {

namespace {

TopologyKind parse_topology(const std::string& name) {
  if (name == "fully-connected") return TopologyKind::FullyConnected;
  if (name == "group-ring") return TopologyKind::GroupRing;
  if (name == "bipartite") return TopologyKind::Bipartite;
  throw ConfigError("unknown topology '" + name + "'");
}

GradMode parse_grad_mode(const std::string& name) {
  if (name == "taylor-approx") return GradMode::TaylorApprox;
  if (name == "cross-gradient") return GradMode::CrossGradient;
  throw ConfigError("unknown grad_mode '" + name + "'");
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "plain") return OptimizerKind::Plain;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + name + "'");
}

Architecture make_arch(const ExperimentConfig& c) {
  if (c.arch == "softmax-regression") return Architecture::softmax_regression(c.input_dim, c.classes_per_client);
  if (c.arch == "mlp-1hidden") return Architecture::mlp(c.input_dim, c.hidden_dim, c.classes_per_client);
  throw ConfigError("unknown arch '" + c.arch + "'");
}

UniverseOptions universe_options(const ExperimentConfig& c) {
  UniverseOptions u;
  u.dim = c.input_dim;
  u.separation = c.separation;
  if (c.sigma > 0.0) u.sigma = c.sigma;
  return u;
}

GeneratedTasks make_tasks(const ExperimentConfig& c) {
  const SampleCounts samples{c.train_samples, c.test_samples};
  if (c.task_setting == "noniid-sbm") {
    return gen_noniid_sbm(c.num_clients, c.num_classes, c.classes_per_client, c.num_groups, samples, c.seed,
                          universe_options(c));
  }
  if (c.task_setting == "noniid-random") {
    return gen_noniid_random(c.num_clients, c.num_classes, c.classes_per_client, samples, c.seed,
                             universe_options(c));
  }
  throw ConfigError("unknown task_setting '" + c.task_setting + "'");
}

Topology make_topology(const ExperimentConfig& c) {
  TopologyParams params;
  params.ring_k0 = c.ring_k0;
  params.bipartite_degree = c.bipartite_degree;
  params.seed = derive_seed(c.seed, {6});
  return build_topology(parse_topology(c.topology), c.num_clients, params);
}

SimulationConfig make_sim_config(const ExperimentConfig& c) {
  SimulationConfig s;
  s.prior = parse_prior(c.prior);
  s.mstep.eta1 = c.eta1;
  s.mstep.local_steps = c.local_steps;
  s.mstep.batch_size = c.batch_size;
  s.mstep.grad_mode = parse_grad_mode(c.grad_mode);
  s.mstep.seed = derive_seed(c.seed, {3});
  s.lambda = c.lambda;
  s.tau = s.prior == PriorKind::Attention ? c.tau_softmax : c.tau_sigmoid;
  s.score_tau = c.tau_score;
  s.eta2 = c.eta2;
  s.variational_optimizer.kind = parse_optimizer(c.optimizer);
  s.memberships = c.memberships;
  s.block_init.alpha = c.alpha_init;
  s.block_init.b_within = c.b_within;
  s.block_init.b_between = c.b_between;
  s.block_init.membership_jitter = c.membership_jitter;
  s.block_init.seed = derive_seed(c.seed, {4});
  s.estep.max_iterations = c.estep_iterations;
  s.estep.tolerance = c.estep_tolerance;
  s.attention_init.hidden_dim = c.encoder_hidden;
  s.attention_init.embed_dim = c.encoder_embed;
  s.attention_init.scale = c.encoder_scale;
  s.attention_init.seed = derive_seed(c.seed, {5});
  s.attention_coupling = c.attention_coupling;
  s.sparsify_keep = c.sparsify_keep;
  s.sparsify_round = c.sparsify_round;
  s.compute_elbo = c.compute_elbo;
  return s;
}

std::vector<LocalModel> make_models(const ExperimentConfig& c, const Architecture& arch) {
  std::vector<LocalModel> models;
  models.reserve(c.num_clients);
  const auto shared = random_parameters(arch, derive_seed(c.seed, {7}), c.init_scale);
  for (std::size_t i = 0; i < c.num_clients; ++i) {
    models.emplace_back(arch, c.shared_init ? shared
                                            : random_parameters(arch, derive_seed(c.seed, {7, i}), c.init_scale));
  }
  return models;
}

RoundMetrics measure(const Simulation& sim, const Matrix& w_star, const RoundResult& rr) {
  RoundMetrics m;
  m.round = rr.round;
  const auto& models = sim.models();
  const auto& clients = sim.clients();
  const double k = static_cast<double>(models.size());
  double sum = 0.0, sq = 0.0, train = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const double a = accuracy(models[i], clients[i].test);
    sum += a;
    sq += a * a;
    train += loss(models[i], clients[i].train);
  }
  m.mean_acc = sum / k;
  m.std_acc = std::sqrt(std::max(0.0, sq / k - m.mean_acc * m.mean_acc));
  m.mean_train_loss = train / k;
  if (rr.elbo) m.elbo = rr.elbo->total;
  const Matrix w = sim.graph();
  m.l1 = metric_l1(w, w_star);
  m.within_group_mass = within_group_mass(w, w_star);
  m.comm_round = rr.traffic.total_units;
  m.comm_total = sim.ledger().total_units;
  m.comm_total_shared = sim.ledger().total_units_shared;
  m.directed_edges = rr.traffic.directed_edges;
  return m;
}

std::string round_tag(int round) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d", round);
  return buf;
}

}  // namespace

PriorKind parse_prior(const std::string& name) {
  if (name == "dirac") return PriorKind::Dirac;
  if (name == "sbm") return PriorKind::Sbm;
  if (name == "attention") return PriorKind::Attention;
  if (name == "mmsbm") return PriorKind::Mmsbm;
  if (name == "local-only") return PriorKind::LocalOnly;
  throw ConfigError("unknown prior '" + name + "'");
}

void validate_config(const ExperimentConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  parse_prior(c.prior);
  parse_grad_mode(c.grad_mode);
  parse_optimizer(c.optimizer);
  parse_topology(c.topology);
  require(c.num_clients >= 2, "num_clients must be >= 2");
  require(c.num_classes >= 2, "num_classes must be >= 2");
  require(c.classes_per_client >= 1 && c.classes_per_client <= c.num_classes,
          "classes_per_client must be in [1, num_classes]");
  require(c.input_dim >= c.num_classes, "input_dim must be >= num_classes");
  require(c.train_samples >= c.classes_per_client, "train_samples must cover every local class");
  require(c.test_samples >= 1, "test_samples must be >= 1");
  require(c.separation > 0.0, "separation must be > 0");
  require(c.sigma >= 0.0, "sigma must be >= 0 (0 = automatic)");
  require(c.init_scale > 0.0, "init_scale must be > 0");
  require(c.arch != "mlp-1hidden" || c.hidden_dim >= 1, "hidden_dim must be >= 1");
  make_arch(c);
  require(c.eta1 > 0.0, "eta1 must be > 0");
  require(c.eta2 > 0.0, "eta2 must be > 0");
  require(c.lambda >= 0.0, "lambda must be >= 0");
  require(c.tau_sigmoid > 0.0, "tau_sigmoid must be > 0");
  require(c.tau_softmax > 0.0, "tau_softmax must be > 0");
  require(c.tau_score > 0.0, "tau_score must be > 0");
  require(c.local_steps >= 1, "local_steps must be >= 1");
  require(c.rounds >= 1, "rounds must be >= 1");
  require(c.memberships >= 1, "memberships must be >= 1");
  require(c.alpha_init > 0.0, "alpha_init must be > 0");
  require(c.b_within > 0.0 && c.b_within < 1.0, "b_within must be in (0, 1)");
  require(c.b_between > 0.0 && c.b_between < 1.0, "b_between must be in (0, 1)");
  require(c.membership_jitter >= 0.0 && c.membership_jitter <= 1.0, "membership_jitter must be in [0, 1]");
  require(c.estep_iterations >= 1, "estep_iterations must be >= 1");
  require(c.estep_tolerance >= 0.0, "estep_tolerance must be >= 0");
  require(c.encoder_hidden >= 1 && c.encoder_embed >= 1, "encoder dims must be >= 1");
  require(c.encoder_scale > 0.0, "encoder_scale must be > 0");
  require(c.sparsify_keep > 0.0 && c.sparsify_keep <= 1.0, "sparsify_keep must be in (0, 1]");
  require(c.sparsify_round >= 1, "sparsify_round must be >= 1");
  if (c.task_setting == "noniid-sbm") {
    require(c.num_groups >= 1 && c.num_clients % c.num_groups == 0, "num_clients must be divisible by num_groups");
    require(c.num_groups * c.classes_per_client <= c.num_classes,
            "num_groups * classes_per_client must not exceed num_classes");
  } else {
    require(c.task_setting == "noniid-random", "unknown task_setting '" + c.task_setting + "'");
  }
  make_topology(c);
}

double metric_l1(const Matrix& w, const Matrix& w_star) {
  const std::size_t k = w.rows();
  if (w.cols() != k || w_star.rows() != k || w_star.cols() != k) throw InputError("metric_l1: shape mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0.0;
    for (double v : w.row(i)) s += v;
    if (!(s > 0.0)) {
      total += 2.0;
      continue;
    }
    for (std::size_t j = 0; j < k; ++j) total += std::abs(w(i, j) / s - w_star(i, j));
  }
  return total / static_cast<double>(k);
}

double within_group_mass(const Matrix& w, const Matrix& w_star) {
  const std::size_t k = w.rows();
  if (w.cols() != k || w_star.rows() != k || w_star.cols() != k) throw InputError("within_group_mass: shape mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double off = 0.0, inside = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      off += w(i, j);
      if (w_star(i, j) > 0.0) inside += w(i, j);
    }
    if (off > 0.0) total += inside / off;
  }
  return total / static_cast<double>(k);
}

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  validate_config(config);
  ExperimentReport report;
  report.config = config;

  GeneratedTasks tasks = make_tasks(config);
  report.w_star = tasks.assignment.w_star;
  const Architecture arch = make_arch(config);
  Simulation sim(make_sim_config(config), make_models(config, arch), std::move(tasks.clients),
                 make_topology(config).mask);

  sim.warm_up(config.warmup_steps);

  const std::size_t every = options.snapshot_every ? options.snapshot_every : config.snapshot_every;
  std::filesystem::path snap_dir;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    if (every) {
      snap_dir = *options.out_dir / "snapshots";
      std::filesystem::create_directories(snap_dir);
    }
  }

  for (std::size_t t = 0; t < config.rounds; ++t) {
    RoundResult rr;
    try {
      rr = sim.run_round();
    } catch (const DivergenceError& e) {
      report.diverged = true;
      report.error = e.what();
      break;
    }
    report.rounds.push_back(measure(sim, report.w_star, rr));
    const bool last = t + 1 == config.rounds;
    if (!snap_dir.empty() && (rr.round % static_cast<int>(every) == 0 || last)) {
      const std::string tag = round_tag(rr.round);
      write_matrix_csv(sim.graph(), snap_dir / ("w_round_" + tag + ".csv"));
      std::ofstream(snap_dir / ("state_round_" + tag + ".json"), std::ios::binary)
          << state_snapshot(sim).dump() << "\n";
    }
  }

  report.final_w = sim.graph();
  for (std::size_t i = 0; i < sim.models().size(); ++i) {
    report.final_accuracy.push_back(accuracy(sim.models()[i], sim.clients()[i].test));
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (options.out_dir) write_report(report, *options.out_dir);
  return report;
}

std::vector<BudgetRow> run_budget_sweep(const ExperimentConfig& base, const std::vector<double>& fractions) {
  if (fractions.empty()) throw ConfigError("budget sweep needs at least one fraction");
  std::vector<BudgetRow> rows;
  for (double f : fractions) {
    ExperimentConfig c = base;
    c.sparsify_keep = f;
    const ExperimentReport r = run_experiment(c);
    if (r.diverged) throw DivergenceError("fraction " + format_double(f) + ": " + r.error);
    BudgetRow row;
    row.fraction = f;
    double sum = 0.0, sq = 0.0;
    for (double a : r.final_accuracy) {
      sum += a;
      sq += a * a;
    }
    const double k = static_cast<double>(r.final_accuracy.size());
    row.mean_acc = sum / k;
    row.std_acc = std::sqrt(std::max(0.0, sq / k - row.mean_acc * row.mean_acc));
    row.comm_total = r.rounds.empty() ? 0.0 : r.rounds.back().comm_total;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace scool
