#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace scool {

// Dense row-major matrix of doubles. Sized for K x K graphs and K x M
// membership tables, so no expression templates or BLAS.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Square boolean adjacency with the diagonal always set.
class Mask {
 public:
  Mask() = default;
  explicit Mask(std::size_t n, bool off_diagonal = false);

  static Mask full(std::size_t n) { return Mask(n, true); }
  static Mask identity(std::size_t n) { return Mask(n, false); }

  std::size_t size() const { return n_; }
  bool operator()(std::size_t i, std::size_t j) const { return bits_[i * n_ + j] != 0; }
  // Diagonal entries stay set regardless of `value`.
  void set(std::size_t i, std::size_t j, bool value);

  // Number of directed off-diagonal pairs (i, j) that are allowed.
  std::size_t directed_edges() const;
  std::size_t neighbors(std::size_t i) const;
  bool symmetric() const;

  bool operator==(const Mask&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> bits_;
};

// K x K x M table indexed by an ordered client pair and a membership slot.
class PairTensor {
 public:
  PairTensor() = default;
  PairTensor(std::size_t clients, std::size_t slots, double fill = 0.0);

  std::size_t clients() const { return clients_; }
  std::size_t slots() const { return slots_; }

  std::span<double> at(std::size_t i, std::size_t j) {
    return {data_.data() + (i * clients_ + j) * slots_, slots_};
  }
  std::span<const double> at(std::size_t i, std::size_t j) const {
    return {data_.data() + (i * clients_ + j) * slots_, slots_};
  }

  bool operator==(const PairTensor&) const = default;

 private:
  std::size_t clients_ = 0;
  std::size_t slots_ = 0;
  std::vector<double> data_;
};

double squared_norm(std::span<const double> v);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace scool
