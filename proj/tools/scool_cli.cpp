#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scool/errors.hpp"
#include "scool/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

scool::ExperimentConfig load(const std::string& path, std::optional<std::uint64_t> seed) {
  scool::ExperimentConfig c = scool::load_config(path);
  if (seed) c.seed = *seed;
  scool::validate_config(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SCooL cooperative-learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::size_t snapshot_every = 0;
  std::vector<double> fractions{0.02, 0.05, 0.08, 0.1, 1.0};

  auto* run = app.add_subcommand("run", "run one experiment and write its report");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--snapshot-every", snapshot_every, "write w/state snapshots every N rounds");

  auto* sweep = app.add_subcommand("sweep-budget", "accuracy against neighbour budget");
  sweep->add_option("--config", config_path, "base experiment config (JSON)")->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--seed", seed, "override the config seed");
  sweep->add_option("--fractions", fractions, "neighbour keep fractions")->delimiter(',');

  auto* check = app.add_subcommand("validate-config", "check a config and print it normalised");
  check->add_option("--config", config_path, "experiment config (JSON)")->required();
  check->add_option("--seed", seed, "override the config seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*check) {
      const auto c = load(config_path, seed);
      std::cout << scool::config_to_json(c).dump(2) << "\n";
      return 0;
    }
    if (*run) {
      const auto c = load(config_path, seed);
      scool::RunOptions opts;
      opts.out_dir = std::filesystem::path(out_dir);
      opts.snapshot_every = snapshot_every;
      const auto report = scool::run_experiment(c, opts);
      if (report.diverged) {
        std::cerr << "diverged: " << report.error << "\n";
        return kExitDivergence;
      }
      const auto& last = report.rounds.back();
      std::printf("prior=%s rounds=%zu mean_acc=%.4f l1=%.4f comm_total=%.1f\n", c.prior.c_str(),
                  report.rounds.size(), last.mean_acc, last.l1, last.comm_total);
      return 0;
    }
    if (*sweep) {
      const auto c = load(config_path, seed);
      const auto rows = scool::run_budget_sweep(c, fractions);
      const auto path = std::filesystem::path(out_dir) / "budget.csv";
      scool::write_budget_csv(rows, path);
      for (const auto& r : rows) {
        std::printf("fraction=%g mean_acc=%.4f std_acc=%.4f comm_total=%.1f\n", r.fraction, r.mean_acc,
                    r.std_acc, r.comm_total);
      }
      return 0;
    }
  } catch (const scool::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const scool::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
