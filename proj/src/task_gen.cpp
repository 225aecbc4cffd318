#include "scool/task_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "scool/core_math.hpp"
#include "scool/errors.hpp"
#include "scool/seeding.hpp"

namespace scool {
namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  double lo = -40.0;
  double hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Dataset draw(const TaskUniverse& universe, std::span<const int> class_set, std::size_t n,
             Split split, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t c = class_set.size();
  Dataset out;
  out.split = split;
  out.class_set.assign(class_set.begin(), class_set.end());
  out.features = Matrix(n, universe.dim);
  out.labels.resize(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t slot = 0;
  for (std::size_t local = 0; local < c; ++local) {
    const std::size_t count = n / c + (local < n % c ? 1 : 0);
    const auto& mean = universe.means[static_cast<std::size_t>(class_set[local])];
    for (std::size_t k = 0; k < count; ++k, ++slot) {
      const std::size_t r = order[slot];
      out.labels[r] = static_cast<int>(local);
      for (std::size_t f = 0; f < universe.dim; ++f) {
        out.features(r, f) = mean[f] + universe.sigma * normal(rng);
      }
    }
  }
  return out;
}

void fill_clients(GeneratedTasks& tasks, SampleCounts samples, std::uint64_t seed) {
  const auto& sets = tasks.assignment.class_sets;
  tasks.clients.reserve(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    auto [train, test] = sample_class_data(tasks.universe, sets[i], samples.train, samples.test,
                                           derive_seed(seed, {2, i}));
    tasks.clients.push_back({std::move(train), std::move(test)});
  }
}

}  // namespace

TaskUniverse TaskUniverse::make(std::size_t num_classes, const UniverseOptions& options,
                                std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("task universe needs at least 2 classes");
  if (options.dim < num_classes) {
    throw ConfigError("feature dimension " + std::to_string(options.dim) +
                      " is smaller than the class count " + std::to_string(num_classes));
  }
  if (!(options.separation > 0.0)) throw ConfigError("class separation must be > 0");

  TaskUniverse u;
  u.num_classes = num_classes;
  u.dim = options.dim;
  if (options.sigma) {
    if (*options.sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
    u.sigma = *options.sigma;
  } else {
    const double target = options.target_bayes_accuracy;
    if (!(target > 0.5 && target < 1.0)) throw ConfigError("target Bayes accuracy must be in (0.5, 1)");
    u.sigma = options.separation / (2.0 * normal_quantile(target));
  }

  // Gram-Schmidt on Gaussian draws gives random orthonormal directions.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double radius = options.separation / std::sqrt(2.0);
  while (u.means.size() < num_classes) {
    std::vector<double> v(u.dim);
    for (double& x : v) x = normal(rng);
    for (const auto& m : u.means) {
      double dot = 0.0;
      for (std::size_t f = 0; f < u.dim; ++f) dot += v[f] * m[f];
      dot /= radius * radius;
      for (std::size_t f = 0; f < u.dim; ++f) v[f] -= dot * m[f];
    }
    const double norm = std::sqrt(squared_norm(v));
    if (norm < 1e-8) continue;
    for (double& x : v) x *= radius / norm;
    u.means.push_back(std::move(v));
  }
  return u;
}

std::pair<Dataset, Dataset> sample_class_data(const TaskUniverse& universe,
                                              std::span<const int> class_set, std::size_t n_train,
                                              std::size_t n_test, std::uint64_t seed) {
  if (class_set.empty()) throw ConfigError("class set is empty");
  for (int c : class_set) {
    if (c < 0 || static_cast<std::size_t>(c) >= universe.num_classes) {
      throw ConfigError("class id " + std::to_string(c) + " outside the universe");
    }
  }
  if (n_train < class_set.size()) {
    throw ConfigError("n_train must provide at least one sample per class");
  }
  std::mt19937_64 train_rng(derive_seed(seed, {0}));
  std::mt19937_64 test_rng(derive_seed(seed, {1}));
  return {draw(universe, class_set, n_train, Split::Train, train_rng),
          draw(universe, class_set, n_test, Split::Test, test_rng)};
}

Matrix ground_truth_mixing(const std::vector<std::vector<int>>& class_sets) {
  const std::size_t k = class_sets.size();
  Matrix w(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) w(i, j) = class_sets[i] == class_sets[j] ? 1.0 : 0.0;
  }
  return row_normalize(w);
}

GeneratedTasks gen_noniid_sbm(std::size_t num_clients, std::size_t num_classes,
                              std::size_t classes_per_client, std::size_t num_groups,
                              SampleCounts samples, std::uint64_t seed,
                              const UniverseOptions& options) {
  if (num_clients == 0) throw ConfigError("need at least one client");
  if (num_groups == 0) throw ConfigError("need at least one group");
  if (classes_per_client == 0) throw ConfigError("classes per client must be >= 1");
  if (num_groups * classes_per_client > num_classes) {
    throw ConfigError("infeasible block setting: " + std::to_string(num_groups) + " groups x " +
                      std::to_string(classes_per_client) + " classes exceeds " +
                      std::to_string(num_classes) + " classes");
  }
  if (num_clients % num_groups != 0) {
    throw ConfigError("client count " + std::to_string(num_clients) +
                      " is not divisible by the group count " + std::to_string(num_groups));
  }

  GeneratedTasks tasks;
  tasks.universe = TaskUniverse::make(num_classes, options, derive_seed(seed, {0}));

  std::vector<int> perm(num_classes);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, {1}));
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<std::vector<int>> group_sets(num_groups);
  for (std::size_t g = 0; g < num_groups; ++g) {
    group_sets[g].assign(perm.begin() + static_cast<long>(g * classes_per_client),
                         perm.begin() + static_cast<long>((g + 1) * classes_per_client));
    std::sort(group_sets[g].begin(), group_sets[g].end());
  }
  const std::size_t group_size = num_clients / num_groups;
  for (std::size_t i = 0; i < num_clients; ++i) {
    const std::size_t g = i / group_size;
    tasks.assignment.class_sets.push_back(group_sets[g]);
    tasks.assignment.group_labels.push_back(static_cast<int>(g));
  }
  tasks.assignment.w_star = ground_truth_mixing(tasks.assignment.class_sets);
  fill_clients(tasks, samples, seed);
  return tasks;
}

GeneratedTasks gen_noniid_random(std::size_t num_clients, std::size_t num_classes,
                                 std::size_t classes_per_client, SampleCounts samples,
                                 std::uint64_t seed, const UniverseOptions& options) {
  if (num_clients == 0) throw ConfigError("need at least one client");
  if (classes_per_client == 0) throw ConfigError("classes per client must be >= 1");
  if (classes_per_client > num_classes) {
    throw ConfigError("classes per client " + std::to_string(classes_per_client) +
                      " exceeds the class count " + std::to_string(num_classes));
  }
  GeneratedTasks tasks;
  tasks.universe = TaskUniverse::make(num_classes, options, derive_seed(seed, {0}));
  std::mt19937_64 rng(derive_seed(seed, {1}));
  for (std::size_t i = 0; i < num_clients; ++i) {
    std::vector<int> pool(num_classes);
    std::iota(pool.begin(), pool.end(), 0);
    // Partial Fisher-Yates: the first N slots become a uniform N-subset.
    for (std::size_t k = 0; k < classes_per_client; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, num_classes - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    pool.resize(classes_per_client);
    std::sort(pool.begin(), pool.end());
    tasks.assignment.class_sets.push_back(std::move(pool));
  }
  tasks.assignment.w_star = ground_truth_mixing(tasks.assignment.class_sets);
  fill_clients(tasks, samples, seed);
  return tasks;
}

}  // namespace scool
