#pragma once

#include <cstddef>
#include <vector>

namespace lidcd {

// Digamma psi(x) for x > 0. Recurrence shift into x >= 6 followed by the
// asymptotic expansion; absolute error well below 1e-12 on (0, 1e8].
double digamma(double x);

// Trigamma psi'(x) for x > 0, same construction.
double trigamma(double x);

// log Beta(a, b) for a, b > 0.
double log_beta(double a, double b);

// Dense matrix exponential of a d x d row-major matrix, scaling-and-squaring
// with a Pade(6) approximant. Result written to `out` (row-major, size d*d).
void matrix_exponential(const double* m, std::size_t d, double* out);

std::vector<double> matrix_exponential(const std::vector<double>& m, std::size_t d);

}  // namespace lidcd
