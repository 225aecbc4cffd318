#include "scool/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace scool {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mask::Mask(std::size_t n, bool off_diagonal) : n_(n), bits_(n * n, off_diagonal ? 1 : 0) {
  for (std::size_t i = 0; i < n; ++i) bits_[i * n + i] = 1;
}

void Mask::set(std::size_t i, std::size_t j, bool value) {
  if (i == j) return;
  bits_[i * n_ + j] = value ? 1 : 0;
}

std::size_t Mask::directed_edges() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n_; ++i) count += neighbors(i);
  return count;
}

std::size_t Mask::neighbors(std::size_t i) const {
  std::size_t count = 0;
  for (std::size_t j = 0; j < n_; ++j) {
    if (j != i && bits_[i * n_ + j]) ++count;
  }
  return count;
}

bool Mask::symmetric() const {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      if (bits_[i * n_ + j] != bits_[j * n_ + i]) return false;
    }
  }
  return true;
}

PairTensor::PairTensor(std::size_t clients, std::size_t slots, double fill)
    : clients_(clients), slots_(slots), data_(clients * clients * slots, fill) {}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace scool
