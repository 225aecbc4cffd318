#pragma once

#include <span>
#include <vector>

#include "scool/matrix.hpp"

namespace scool {

// psi(x) = d/dx log Gamma(x), x > 0. Throws DomainError otherwise.
double digamma(double x);

// log Gamma(x), x > 0. Throws DomainError otherwise.
double log_gamma(double x);

// exp(l_k / tau) / sum_l exp(l_l / tau), evaluated after subtracting the max logit.
// Throws InputError on a non-finite logit or tau <= 0.
std::vector<double> softmax_tempered(std::span<const double> logits, double tau);

// 1 / (1 + exp(-x / tau)); saturates instead of overflowing.
double sigmoid_tempered(double x, double tau);

// Divides each row by its sum. Throws NormalizationError naming the first
// row whose sum is not positive.
Matrix row_normalize(const Matrix& m);

}  // namespace scool
