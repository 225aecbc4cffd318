#include "scool/local_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "scool/errors.hpp"

namespace scool {

std::size_t Architecture::parameter_count() const {
  switch (kind) {
    case ArchKind::SoftmaxRegression:
      return num_classes * input_dim + num_classes;
    case ArchKind::Mlp1Hidden:
      return hidden_dim * input_dim + hidden_dim + num_classes * hidden_dim + num_classes;
  }
  return 0;
}

std::string Architecture::describe() const {
  if (kind == ArchKind::SoftmaxRegression) {
    return "softmax-regression(" + std::to_string(input_dim) + "," + std::to_string(num_classes) + ")";
  }
  return "mlp-1hidden(" + std::to_string(input_dim) + "," + std::to_string(hidden_dim) + "," +
         std::to_string(num_classes) + ")";
}

Architecture Architecture::softmax_regression(std::size_t d, std::size_t classes) {
  return {ArchKind::SoftmaxRegression, d, 0, classes};
}

Architecture Architecture::mlp(std::size_t d, std::size_t hidden, std::size_t classes) {
  return {ArchKind::Mlp1Hidden, d, hidden, classes};
}

LocalModel::LocalModel(Architecture arch, std::vector<double> theta)
    : arch_(arch), theta_(std::move(theta)) {
  if (theta_.size() != arch_.parameter_count()) {
    throw InputError("LocalModel: theta has " + std::to_string(theta_.size()) +
                     " entries, " + arch_.describe() + " needs " +
                     std::to_string(arch_.parameter_count()));
  }
  init_theta_ = theta_;
}

void LocalModel::set_theta(std::span<const double> values) {
  if (values.size() != theta_.size()) throw InputError("LocalModel::set_theta: size mismatch");
  std::copy(values.begin(), values.end(), theta_.begin());
}

std::vector<double> random_parameters(const Architecture& arch, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> theta(arch.parameter_count(), 0.0);
  auto fill = [&](std::size_t offset, std::size_t count, double fan_in) {
    const double s = scale / std::sqrt(fan_in);
    for (std::size_t k = 0; k < count; ++k) theta[offset + k] = s * normal(rng);
  };
  const std::size_t d = arch.input_dim;
  const std::size_t c = arch.num_classes;
  if (arch.kind == ArchKind::SoftmaxRegression) {
    fill(0, c * d, static_cast<double>(d));
  } else {
    const std::size_t h = arch.hidden_dim;
    fill(0, h * d, static_cast<double>(d));
    fill(h * d + h, c * h, static_cast<double>(h));
  }
  return theta;
}

namespace {

void check_compatible(const Architecture& arch, std::span<const double> theta, const Dataset& data) {
  if (data.size() == 0) throw InputError("dataset is empty");
  if (data.dim() != arch.input_dim) {
    throw InputError("feature dimension " + std::to_string(data.dim()) + " does not match " +
                     arch.describe());
  }
  if (theta.size() != arch.parameter_count()) {
    throw InputError("parameter vector length does not match " + arch.describe());
  }
}

int checked_label(const Architecture& arch, const Dataset& data, std::size_t r) {
  const int y = data.labels[r];
  if (y < 0 || static_cast<std::size_t>(y) >= arch.num_classes) {
    throw InputError("label " + std::to_string(y) + " outside [0, " +
                     std::to_string(arch.num_classes) + ")");
  }
  return y;
}

// Overwrites `z` with softmax(z) and returns log-sum-exp of the input.
double softmax_inplace(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    total += v;
  }
  for (double& v : z) v /= total;
  return m + std::log(total);
}

}  // namespace

void forward_logits(const Architecture& arch, std::span<const double> theta,
                    std::span<const double> x, std::span<double> out) {
  const std::size_t d = arch.input_dim;
  const std::size_t c = arch.num_classes;
  if (arch.kind == ArchKind::SoftmaxRegression) {
    const double* w = theta.data();
    const double* b = theta.data() + c * d;
    for (std::size_t k = 0; k < c; ++k) {
      double s = b[k];
      for (std::size_t f = 0; f < d; ++f) s += w[k * d + f] * x[f];
      out[k] = s;
    }
    return;
  }
  const std::size_t h = arch.hidden_dim;
  const double* w1 = theta.data();
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const double* b2 = w2 + c * h;
  std::vector<double> hidden(h);
  for (std::size_t u = 0; u < h; ++u) {
    double s = b1[u];
    for (std::size_t f = 0; f < d; ++f) s += w1[u * d + f] * x[f];
    hidden[u] = std::tanh(s);
  }
  for (std::size_t k = 0; k < c; ++k) {
    double s = b2[k];
    for (std::size_t u = 0; u < h; ++u) s += w2[k * h + u] * hidden[u];
    out[k] = s;
  }
}

double evaluate(const Architecture& arch, std::span<const double> theta, const Dataset& data,
                std::span<const std::size_t> rows, std::span<double> grad_out) {
  check_compatible(arch, theta, data);
  const bool want_grad = !grad_out.empty();
  if (want_grad) {
    if (grad_out.size() != theta.size()) throw InputError("gradient buffer size mismatch");
    std::fill(grad_out.begin(), grad_out.end(), 0.0);
  }
  const std::size_t n = rows.empty() ? data.size() : rows.size();
  const std::size_t d = arch.input_dim;
  const std::size_t c = arch.num_classes;
  const std::size_t h = arch.hidden_dim;
  std::vector<double> z(c);
  std::vector<double> hidden(h);
  std::vector<double> dh(h);
  double total = 0.0;

  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t r = rows.empty() ? s : rows[s];
    const int y = checked_label(arch, data, r);
    const auto x = data.features.row(r);

    if (arch.kind == ArchKind::SoftmaxRegression) {
      forward_logits(arch, theta, x, z);
      const double zy = z[y];
      total += softmax_inplace(z) - zy;
      if (!want_grad) continue;
      z[y] -= 1.0;
      double* gw = grad_out.data();
      double* gb = grad_out.data() + c * d;
      for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t f = 0; f < d; ++f) gw[k * d + f] += z[k] * x[f];
        gb[k] += z[k];
      }
      continue;
    }

    const double* w1 = theta.data();
    const double* b1 = w1 + h * d;
    const double* w2 = b1 + h;
    const double* b2 = w2 + c * h;
    for (std::size_t u = 0; u < h; ++u) {
      double a = b1[u];
      for (std::size_t f = 0; f < d; ++f) a += w1[u * d + f] * x[f];
      hidden[u] = std::tanh(a);
    }
    for (std::size_t k = 0; k < c; ++k) {
      double a = b2[k];
      for (std::size_t u = 0; u < h; ++u) a += w2[k * h + u] * hidden[u];
      z[k] = a;
    }
    const double zy = z[y];
    total += softmax_inplace(z) - zy;
    if (!want_grad) continue;
    z[y] -= 1.0;
    double* gw1 = grad_out.data();
    double* gb1 = gw1 + h * d;
    double* gw2 = gb1 + h;
    double* gb2 = gw2 + c * h;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t u = 0; u < h; ++u) {
        gw2[k * h + u] += z[k] * hidden[u];
        dh[u] += w2[k * h + u] * z[k];
      }
      gb2[k] += z[k];
    }
    for (std::size_t u = 0; u < h; ++u) {
      const double da = dh[u] * (1.0 - hidden[u] * hidden[u]);
      for (std::size_t f = 0; f < d; ++f) gw1[u * d + f] += da * x[f];
      gb1[u] += da;
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  if (want_grad) {
    for (double& g : grad_out) g *= inv_n;
  }
  return total * inv_n;
}

double loss(const LocalModel& model, const Dataset& data) {
  return evaluate(model.arch(), model.theta(), data, {}, {});
}

std::vector<double> grad(const LocalModel& model, const Dataset& data) {
  std::vector<double> g(model.theta().size());
  evaluate(model.arch(), model.theta(), data, {}, g);
  return g;
}

double log_likelihood(const LocalModel& model, const Dataset& data) { return -loss(model, data); }

double accuracy(const LocalModel& model, const Dataset& data) {
  check_compatible(model.arch(), model.theta(), data);
  std::vector<double> z(model.arch().num_classes);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const int y = checked_label(model.arch(), data, r);
    forward_logits(model.arch(), model.theta(), data.features.row(r), z);
    // max_element returns the first maximum, i.e. the lowest index on ties.
    const auto best = std::max_element(z.begin(), z.end()) - z.begin();
    if (best == y) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace scool
