// Acceptance runner: one PASS/FAIL line per criterion.
//   scool_acceptance [--allow-fail N[,N...]]
// Exit status is 0 when every failing criterion is listed in --allow-fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "scool/experiment.hpp"
#include "scool/seeding.hpp"
#include "scool/simulation.hpp"

using namespace scool;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget = 0.0;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---- 1. stationarity -------------------------------------------------------

Outcome stationarity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t k = seed % 2 ? 6 : 3;
    const std::size_t m = 1 + seed % 3;
    const auto sb = oracle::random_sbm(seed, k, m);
    const auto mm = oracle::random_mmsbm(seed, k, m);
    const auto at = oracle::random_attention(seed, k);
    for (double r : {oracle::sbm_w_residual(sb), oracle::sbm_gamma_residual(sb), oracle::sbm_omega_residual(sb),
                     oracle::attention_w_residual(at), oracle::mmsbm_w_residual(mm),
                     oracle::mmsbm_gamma_residual(mm), oracle::mmsbm_phi_send_residual(mm),
                     oracle::mmsbm_phi_recv_residual(mm)}) {
      worst = std::max(worst, r);
    }
  }
  return {worst < 1e-4, "max KKT residual " + fmt("%.2e", worst) + " over 50 states x 8 blocks", seconds_since(t0), 30};
}

// ---- 2. monotonicity -------------------------------------------------------

Outcome monotonicity() {
  const auto t0 = Clock::now();
  double worst_sbm = INFINITY, worst_mm = INFINITY, worst_att = INFINITY;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t k = seed % 2 ? 6 : 3;
    const std::size_t m = 1 + seed % 3;
    worst_sbm = std::min(worst_sbm, oracle::sbm_worst_step(oracle::random_sbm(seed + 1000, k, m)));
    worst_mm = std::min(worst_mm, oracle::mmsbm_worst_step(oracle::random_mmsbm(seed + 1000, k, m)));
    worst_att = std::min(worst_att, oracle::attention_worst_step(oracle::random_attention(seed + 1000, k)));
  }
  const double worst = std::min({worst_sbm, worst_mm, worst_att});
  return {worst >= -1e-8,
          "min ELBO change sbm " + fmt("%.2e", worst_sbm) + ", mmsbm " + fmt("%.2e", worst_mm) + ", attention " +
              fmt("%.2e", worst_att),
          seconds_since(t0), 30};
}

// ---- 3. D-PSGD equivalence -------------------------------------------------

Outcome dpsgd_equivalence() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto tasks = gen_noniid_random(5, 6, 2, {.train = 12, .test = 4}, seed, {.dim = 8});
    const auto arch = Architecture::softmax_regression(8, 2);
    std::vector<LocalModel> models;
    for (std::size_t i = 0; i < 5; ++i) models.emplace_back(arch, random_parameters(arch, seed * 10 + i));
    oracle::Rng rng(seed);
    const Mask mask = seed % 2 ? Mask::full(5) : oracle::random_mask(rng, 5, 0.5);
    SimulationConfig sc;
    sc.prior = PriorKind::Dirac;
    sc.mstep = {.eta1 = 0.1, .local_steps = 2, .batch_size = 5, .seed = seed};
    Simulation sim(sc, models, tasks.clients, mask);
    const DiracState state{metropolis_weights(mask), sc.mstep.eta1};
    auto reference = models;
    for (int r = 1; r <= 10; ++r) {
      sim.run_round();
      MStepOptions opts = sc.mstep;
      opts.round = r;
      dpsgd_round(reference, state, tasks.clients, mask, opts);
    }
    for (std::size_t i = 0; i < 5; ++i) worst = std::max(worst, max_abs_diff(sim.models()[i].theta(), reference[i].theta()));
  }
  return {worst < 1e-12, "max |dtheta| " + fmt("%.2e", worst) + " over 10 rounds, 5 instances", seconds_since(t0), 5};
}

// ---- 4. gradient oracles ---------------------------------------------------

Outcome gradients() {
  const auto t0 = Clock::now();
  double softmax = 0, mlp = 0, phi = 0, theta = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    softmax = std::max(softmax, oracle::model_gradient_error(seed, ArchKind::SoftmaxRegression));
    mlp = std::max(mlp, oracle::model_gradient_error(seed, ArchKind::Mlp1Hidden));
    phi = std::max(phi, oracle::attention_phi_gradient_error(seed));
    theta = std::max(theta, oracle::attention_theta_gradient_error(seed));
  }
  const double worst = std::max({softmax, mlp, phi, theta});
  return {worst < 1e-4,
          "max rel. error softmax " + fmt("%.1e", softmax) + ", mlp " + fmt("%.1e", mlp) + ", phi " + fmt("%.1e", phi) +
              ", theta coupling " + fmt("%.1e", theta) + " (25 instances each)",
          seconds_since(t0), 20};
}

// ---- 5-7. benchmark --------------------------------------------------------

struct BenchRun {
  double l1_first = 0.0;
  double l1_last = 0.0;
  double mass_last = 0.0;
  double mean_acc = 0.0;
  double seconds = 0.0;
};

ExperimentConfig benchmark(const std::string& prior) {
  return load_config(fs::path(SCOOL_CONFIG_DIR) / ("benchmark_" + prior + ".json"));
}

BenchRun run_bench(ExperimentConfig c) {
  const auto t0 = Clock::now();
  const auto report = run_experiment(c);
  BenchRun b;
  if (report.diverged || report.rounds.empty()) return b;
  b.l1_first = report.rounds.front().l1;
  b.l1_last = report.rounds.back().l1;
  b.mass_last = report.rounds.back().within_group_mass;
  b.mean_acc = report.rounds.back().mean_acc;
  b.seconds = seconds_since(t0);
  return b;
}

const std::uint64_t kSeeds[3] = {1, 2, 3};

struct Benchmarks {
  std::map<std::string, std::vector<BenchRun>> runs;

  double seconds(const std::vector<std::string>& keys) const {
    double s = 0.0;
    for (const auto& k : keys)
      for (const auto& r : runs.at(k)) s += r.seconds;
    return s;
  }
  double mean_acc(const std::string& key) const {
    double s = 0.0;
    for (const auto& r : runs.at(key)) s += r.mean_acc;
    return s / static_cast<double>(runs.at(key).size());
  }
};

Benchmarks run_benchmarks() {
  Benchmarks b;
  for (const std::string prior : {"sbm", "attention", "local-only", "dirac"}) {
    for (std::uint64_t seed : kSeeds) {
      ExperimentConfig c = benchmark(prior);
      c.seed = seed;
      b.runs[prior].push_back(run_bench(c));
      if (prior == "sbm" || prior == "attention") {
        c.grad_mode = "cross-gradient";
        b.runs[prior + "/cross"].push_back(run_bench(c));
      }
    }
  }
  return b;
}

Outcome recovery(const Benchmarks& b) {
  bool ok = true;
  std::ostringstream d;
  for (const std::string prior : {"sbm", "attention"}) {
    d << prior << ":";
    for (const auto& r : b.runs.at(prior)) {
      const bool pass = r.l1_last < 0.5 * r.l1_first && r.mass_last > 0.8;
      ok = ok && pass;
      d << " l1 " << fmt("%.3f", r.l1_first) << "->" << fmt("%.3f", r.l1_last) << " mass " << fmt("%.3f", r.mass_last)
        << (pass ? "" : " (miss)") << ";";
    }
    d << " ";
  }
  return {ok, d.str(), b.seconds({"sbm", "attention"}), 120};
}

Outcome personalization(const Benchmarks& b) {
  const double sbm = b.mean_acc("sbm");
  const double att = b.mean_acc("attention");
  const double local = b.mean_acc("local-only");
  const double dirac = b.mean_acc("dirac");
  const bool ok = sbm >= local + 0.02 && att >= local + 0.02 && sbm >= dirac && att >= dirac;
  return {ok,
          "mean acc sbm " + fmt("%.4f", sbm) + ", attention " + fmt("%.4f", att) + ", local-only " + fmt("%.4f", local) +
              ", dirac " + fmt("%.4f", dirac) + " (needs >= local + 0.02 and >= dirac)",
          b.seconds({"sbm", "attention", "local-only", "dirac"}), 180};
}

bool equal_model_modes_identical() {
  auto tasks = gen_noniid_sbm(6, 4, 2, 2, {.train = 10, .test = 4}, 8, {.dim = 5});
  const auto arch = Architecture::softmax_regression(5, 2);
  const std::vector<LocalModel> models(6, LocalModel(arch, random_parameters(arch, 3)));
  oracle::Rng rng(2);
  Matrix w(6, 6);
  for (double& v : w.data()) v = oracle::uniform(rng, 0.0, 1.0);
  MStepOptions opts{.lambda = 0.01, .eta1 = 0.2, .local_steps = 1};
  auto taylor = models;
  auto cross = models;
  opts.grad_mode = GradMode::TaylorApprox;
  cooperative_m_step(taylor, tasks.clients, w, Mask::full(6), opts);
  opts.grad_mode = GradMode::CrossGradient;
  cooperative_m_step(cross, tasks.clients, w, Mask::full(6), opts);
  for (std::size_t i = 0; i < 6; ++i) {
    if (!std::equal(taylor[i].theta().begin(), taylor[i].theta().end(), cross[i].theta().begin())) return false;
  }
  return true;
}

Outcome taylor_soundness(const Benchmarks& b) {
  const auto t0 = Clock::now();
  const bool identical = equal_model_modes_identical();
  bool ok = identical;
  std::ostringstream d;
  for (const std::string prior : {"sbm", "attention"}) {
    d << prior << " |l1 taylor - l1 cross|:";
    const auto& t = b.runs.at(prior);
    const auto& c = b.runs.at(prior + "/cross");
    for (std::size_t s = 0; s < t.size(); ++s) {
      const double gap = std::abs(t[s].l1_last - c[s].l1_last);
      ok = ok && gap <= 0.15;
      d << " " << fmt("%.3f", gap);
    }
    d << "; ";
  }
  d << "equal-model step " << (identical ? "bit-identical" : "DIFFERS");
  return {ok, d.str(), b.seconds({"sbm", "attention", "sbm/cross", "attention/cross"}) + seconds_since(t0), 120};
}

// ---- 8. communication accounting -------------------------------------------

struct Parts {
  std::vector<LocalModel> models;
  std::vector<ClientData> clients;
};

Parts small_parts(std::size_t k) {
  Parts p;
  auto tasks = gen_noniid_sbm(k, 6, 2, 3, {.train = 6, .test = 2}, 4, {.dim = 6});
  p.clients = std::move(tasks.clients);
  const auto arch = Architecture::softmax_regression(6, 2);
  p.models.assign(k, LocalModel(arch, random_parameters(arch, 1)));
  return p;
}

Outcome accounting() {
  const auto t0 = Clock::now();
  const std::size_t k = 12;
  const std::size_t sweeps = 2;
  bool ok = true;
  std::ostringstream d;

  struct Case {
    const char* name;
    Mask mask;
    double edges;
  };
  const Mask ring = build_topology(TopologyKind::GroupRing, k, {.ring_k0 = 6}).mask;
  const Mask bip = build_topology(TopologyKind::Bipartite, k, {.bipartite_degree = 2, .seed = 5}).mask;
  // Bipartite: every edge joins the two halves, so the directed count is twice
  // the number of cross pairs present.
  double bip_pairs = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) bip_pairs += bip(i, j);
  const std::vector<Case> cases{{"fully-connected", Mask::full(k), double(k * (k - 1))},
                                {"group-ring", ring, double(k * 2 * ((k - 6) / 2))},
                                {"bipartite", bip, 2.0 * bip_pairs}};
  for (const auto& c : cases) {
    for (GradMode mode : {GradMode::TaylorApprox, GradMode::CrossGradient}) {
      Parts p = small_parts(k);
      SimulationConfig sc;
      sc.prior = PriorKind::Sbm;
      sc.mstep = {.eta1 = 0.1, .local_steps = sweeps, .grad_mode = mode};
      sc.estep.max_iterations = 1;
      Simulation sim(sc, p.models, p.clients, c.mask);
      for (int r = 0; r < 3; ++r) sim.run_round();
      const double per_edge = mode == GradMode::CrossGradient ? 1.0 + 2.0 * sweeps : 1.0 + sweeps;
      const double expected = 3.0 * c.edges * per_edge;
      const bool match = sim.ledger().total_units == expected && sim.mask().directed_edges() == c.edges;
      ok = ok && match;
      if (mode == GradMode::TaylorApprox) d << c.name << " " << sim.ledger().total_units << "/" << expected << "; ";
    }
  }

  Parts p = small_parts(k);
  SimulationConfig sc;
  sc.prior = PriorKind::Sbm;
  sc.mstep = {.eta1 = 0.1, .local_steps = sweeps};
  sc.estep.max_iterations = 1;
  sc.sparsify_keep = 0.2;
  sc.sparsify_round = 10;
  Simulation sim(sc, p.models, p.clients, Mask::full(k));
  std::vector<double> traffic;
  for (int r = 0; r < 12; ++r) traffic.push_back(sim.run_round().traffic.total_units);
  const double kept = static_cast<double>(k * static_cast<std::size_t>(std::ceil(0.2 * (k - 1))));
  const double ratio = traffic[10] / traffic[9];
  const bool sparse_ok = traffic[9] == traffic[0] && ratio == kept / double(k * (k - 1)) && traffic[11] == traffic[10];
  ok = ok && sparse_ok;
  d << "sparsify 0.2 @10: traffic ratio " << fmt("%.6f", ratio) << " = " << kept << "/" << k * (k - 1);
  return {ok, d.str(), seconds_since(t0), 5};
}

// ---- 9. determinism --------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / ("scool_accept_" + std::to_string(::getpid()));
  bool ok = true;
  std::size_t files = 0;
  for (const std::string prior : {"sbm", "attention", "mmsbm", "dirac", "local-only"}) {
    ExperimentConfig c = benchmark(prior);
    if (prior == "mmsbm") c.rounds = 10;
    const fs::path a = root / (prior + "_a");
    const fs::path b = root / (prior + "_b");
    run_experiment(c, {.out_dir = a, .snapshot_every = 5});
    run_experiment(c, {.out_dir = b, .snapshot_every = 5});
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file() || e.path().filename() == "timing.json") continue;
      ok = ok && slurp(e.path()) == slurp(b / fs::relative(e.path(), a));
      ++files;
    }
  }
  fs::remove_all(root);
  return {ok && files > 0, std::to_string(files) + " report and snapshot files compared across 5 priors", seconds_since(t0), 60};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> allowed;
  for (int a = 1; a < argc; ++a) {
    const std::string arg = argv[a];
    if (arg == "--allow-fail" && a + 1 < argc) {
      std::stringstream list(argv[++a]);
      std::string item;
      while (std::getline(list, item, ',')) allowed.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: %s [--allow-fail N[,N...]]\n", argv[0]);
      return 2;
    }
  }

  std::vector<std::function<Outcome()>> checks{stationarity, monotonicity, dpsgd_equivalence, gradients};
  std::vector<Outcome> results;
  for (const auto& check : checks) results.push_back(check());
  const Benchmarks bench = run_benchmarks();
  results.push_back(recovery(bench));
  results.push_back(personalization(bench));
  results.push_back(taylor_soundness(bench));
  results.push_back(accounting());
  results.push_back(determinism());

  int unexpected = 0;
  for (std::size_t n = 0; n < results.size(); ++n) {
    Outcome& r = results[n];
    const bool in_time = r.seconds < r.budget;
    const bool pass = r.pass && in_time;
    const int id = static_cast<int>(n + 1);
    std::printf("criterion %d: %s  %s [%.1fs / %.0fs budget]%s\n", id, pass ? "PASS" : "FAIL", r.detail.c_str(),
                r.seconds, r.budget, in_time ? "" : " (over budget)");
    if (!pass && !allowed.count(id)) ++unexpected;
  }
  std::fflush(stdout);
  return unexpected == 0 ? 0 : 1;
}
