#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scool/matrix.hpp"

namespace scool {

enum class ArchKind { SoftmaxRegression, Mlp1Hidden };

// Parameter layout:
//   softmax-regression: W (C x d) row-major, then b (C)
//   mlp-1hidden:        W1 (h x d), b1 (h), W2 (C x h), b2 (C); tanh hidden units
struct Architecture {
  ArchKind kind = ArchKind::SoftmaxRegression;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t num_classes = 0;

  std::size_t parameter_count() const;
  std::string describe() const;

  static Architecture softmax_regression(std::size_t d, std::size_t classes);
  static Architecture mlp(std::size_t d, std::size_t hidden, std::size_t classes);

  bool operator==(const Architecture&) const = default;
};

enum class Split { Train, Test };

// Labels are local indices into class_set (sorted global class ids).
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<int> class_set;
  Split split = Split::Train;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
};

class LocalModel {
 public:
  LocalModel() = default;
  LocalModel(Architecture arch, std::vector<double> theta);

  const Architecture& arch() const { return arch_; }
  std::span<const double> theta() const { return theta_; }
  std::span<double> theta() { return theta_; }
  // Parameters at construction; the reference point for model deltas.
  std::span<const double> init_theta() const { return init_theta_; }

  void set_theta(std::span<const double> values);

 private:
  Architecture arch_;
  std::vector<double> theta_;
  std::vector<double> init_theta_;
};

// Gaussian initialisation scaled per layer by 1/sqrt(fan_in).
std::vector<double> random_parameters(const Architecture& arch, std::uint64_t seed, double scale = 1.0);

// Mean cross-entropy over the selected rows (all rows when `rows` is empty).
// When `grad_out` is non-empty it receives the gradient of that mean.
double evaluate(const Architecture& arch, std::span<const double> theta, const Dataset& data,
                std::span<const std::size_t> rows, std::span<double> grad_out);

double loss(const LocalModel& model, const Dataset& data);
std::vector<double> grad(const LocalModel& model, const Dataset& data);
// Negative mean cross-entropy (per-sample, not summed).
double log_likelihood(const LocalModel& model, const Dataset& data);
// Fraction of argmax-correct predictions, ties going to the lowest class index.
double accuracy(const LocalModel& model, const Dataset& data);

// Class scores for one feature row; `out` has num_classes entries.
void forward_logits(const Architecture& arch, std::span<const double> theta,
                    std::span<const double> x, std::span<double> out);

}  // namespace scool
