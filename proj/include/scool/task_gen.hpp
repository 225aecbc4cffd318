#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "scool/local_model.hpp"
#include "scool/matrix.hpp"

namespace scool {

struct UniverseOptions {
  std::size_t dim = 10;
  // Euclidean distance between any two class means.
  double separation = 2.0;
  // Isotropic noise level; when unset it is chosen so that a two-class
  // problem has Bayes accuracy `target_bayes_accuracy`.
  std::optional<double> sigma;
  double target_bayes_accuracy = 0.9;
};

// M Gaussian classes with means on random orthonormal directions and
// shared covariance sigma^2 I.
struct TaskUniverse {
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  double sigma = 0.0;
  std::vector<std::vector<double>> means;

  static TaskUniverse make(std::size_t num_classes, const UniverseOptions& options, std::uint64_t seed);
};

struct TaskAssignment {
  std::vector<std::vector<int>> class_sets;
  // Row-normalised indicator of identical class sets, diagonal included.
  Matrix w_star;
  // Group index per client; empty outside the block setting.
  std::vector<int> group_labels;
};

struct ClientData {
  Dataset train;
  Dataset test;
};

struct SampleCounts {
  std::size_t train = 20;
  std::size_t test = 100;
};

struct GeneratedTasks {
  TaskUniverse universe;
  TaskAssignment assignment;
  std::vector<ClientData> clients;
};

// Clients are split into `num_groups` contiguous groups; each group owns a
// disjoint random subset of N classes.
GeneratedTasks gen_noniid_sbm(std::size_t num_clients, std::size_t num_classes,
                              std::size_t classes_per_client, std::size_t num_groups,
                              SampleCounts samples, std::uint64_t seed,
                              const UniverseOptions& options = {});

// Every client draws a uniform random N-subset of the M classes.
GeneratedTasks gen_noniid_random(std::size_t num_clients, std::size_t num_classes,
                                 std::size_t classes_per_client, SampleCounts samples,
                                 std::uint64_t seed, const UniverseOptions& options = {});

// Balanced draws from the universe restricted to `class_set`; labels are
// local indices into the sorted class set.
std::pair<Dataset, Dataset> sample_class_data(const TaskUniverse& universe,
                                              std::span<const int> class_set, std::size_t n_train,
                                              std::size_t n_test, std::uint64_t seed);

Matrix ground_truth_mixing(const std::vector<std::vector<int>>& class_sets);

}  // namespace scool
