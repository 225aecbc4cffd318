#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scool/matrix.hpp"
#include "scool/simulation.hpp"

namespace scool {

inline constexpr int kReportSchemaVersion = 1;

// Flat experiment description; every field maps to one JSON key of the same name.
struct ExperimentConfig {
  std::string prior = "sbm";  // dirac | sbm | attention | mmsbm | local-only
  std::string task_setting = "noniid-sbm";  // noniid-sbm | noniid-random
  std::size_t num_clients = 12;
  std::size_t num_classes = 6;
  std::size_t classes_per_client = 2;
  std::size_t num_groups = 3;
  std::size_t train_samples = 20;
  std::size_t test_samples = 100;
  std::size_t input_dim = 10;
  double separation = 2.0;
  // 0 picks the noise level from the target two-class Bayes accuracy.
  double sigma = 0.0;
  std::string arch = "softmax-regression";  // softmax-regression | mlp-1hidden
  std::size_t hidden_dim = 16;
  double init_scale = 1.0;
  bool shared_init = true;

  double eta1 = 0.1;
  double eta2 = 0.1;
  double lambda = 0.01;
  double tau_sigmoid = 1.0;
  double tau_softmax = 1.0;
  double tau_score = 1.0;
  std::size_t local_steps = 2;
  std::size_t batch_size = 0;
  std::size_t rounds = 30;
  // Local full-batch steps before round 1.
  std::size_t warmup_steps = 0;
  std::string grad_mode = "taylor-approx";  // taylor-approx | cross-gradient
  std::string optimizer = "plain";  // plain | adam

  std::size_t memberships = 3;
  double alpha_init = 1.0;
  double b_within = 0.7;
  double b_between = 0.3;
  // Mixing weight of the random Dirichlet draw in the initial memberships.
  double membership_jitter = 0.1;
  std::size_t estep_iterations = 50;
  double estep_tolerance = 1e-9;

  bool attention_coupling = true;
  std::size_t encoder_hidden = 10;
  std::size_t encoder_embed = 5;
  double encoder_scale = 1.0;

  std::string topology = "fully-connected";  // fully-connected | group-ring | bipartite
  std::size_t ring_k0 = 0;
  std::size_t bipartite_degree = 0;
  double sparsify_keep = 1.0;
  int sparsify_round = 10;

  bool compute_elbo = true;
  std::size_t snapshot_every = 0;
  std::uint64_t seed = 1;

  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json config_to_json(const ExperimentConfig& config);
// Unknown keys and ill-typed values raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
// Checks every positivity and feasibility constraint; throws ConfigError.
void validate_config(const ExperimentConfig& config);

PriorKind parse_prior(const std::string& name);

struct RoundMetrics {
  int round = 0;
  double mean_acc = 0.0;
  double std_acc = 0.0;
  double mean_train_loss = 0.0;
  std::optional<double> elbo;
  double l1 = 0.0;
  double within_group_mass = 0.0;
  double comm_round = 0.0;
  double comm_total = 0.0;
  double comm_total_shared = 0.0;
  std::size_t directed_edges = 0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<RoundMetrics> rounds;
  std::vector<double> final_accuracy;
  Matrix final_w;
  Matrix w_star;
  bool diverged = false;
  std::string error;
  double wall_seconds = 0.0;
};

// sum_ij |normalize(w)_ij - w*_ij| / K; an all-zero row counts as 2.
double metric_l1(const Matrix& w, const Matrix& w_star);
// Mean over clients of the off-diagonal weight share on pairs with w*_ij > 0,
// after row normalisation. Rows without off-diagonal weight contribute 0.
double within_group_mass(const Matrix& w, const Matrix& w_star);

struct RunOptions {
  // Directory for report files; nothing is written when unset.
  std::optional<std::filesystem::path> out_dir;
  // Snapshot period in rounds; 0 falls back to config.snapshot_every.
  std::size_t snapshot_every = 0;
};

// Generates tasks, runs the configured rounds and collects metrics. A
// divergence stops the run and returns the partial report flagged.
ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct BudgetRow {
  double fraction = 1.0;
  double mean_acc = 0.0;
  double std_acc = 0.0;
  double comm_total = 0.0;
};

std::vector<BudgetRow> run_budget_sweep(const ExperimentConfig& base, const std::vector<double>& fractions);

// Report writers (deterministic content; wall time goes to timing.json only).
nlohmann::json report_to_json(const ExperimentReport& report);
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);
void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);
void write_budget_csv(const std::vector<BudgetRow>& rows, const std::filesystem::path& path);
nlohmann::json state_snapshot(const Simulation& sim);
// Shortest round-trip decimal text of a double.
std::string format_double(double v);

}  // namespace scool
