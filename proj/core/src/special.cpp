#include "lidcd/special.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace lidcd {

double digamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma: requires x > 0");
  double result = 0.0;
  while (x < 8.0) {  // psi(x) = psi(x+1) - 1/x
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // ln x - 1/(2x) - sum B_{2n} / (2n x^{2n})
  double series = inv2 * (1.0 / 12.0 -
                  inv2 * (1.0 / 120.0 -
                  inv2 * (1.0 / 252.0 -
                  inv2 * (1.0 / 240.0 -
                  inv2 * (1.0 / 132.0 -
                  inv2 * (691.0 / 32760.0))))));
  return result + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("trigamma: requires x > 0");
  double result = 0.0;
  while (x < 10.0) {  // psi'(x) = psi'(x+1) + 1/x^2
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = 1.0 +
                  inv * (0.5 +
                  inv * (1.0 / 6.0 -
                  inv2 * (1.0 / 30.0 -
                  inv2 * (1.0 / 42.0 -
                  inv2 * (1.0 / 30.0 -
                  inv2 * (5.0 / 66.0))))));
  return result + inv * series;
}

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

namespace {

// C = A * B for d x d row-major matrices.
void matmul_sq(const double* a, const double* b, std::size_t d, double* c) {
  std::memset(c, 0, sizeof(double) * d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double aik = a[i * d + k];
      if (aik == 0.0) continue;
      const double* brow = b + k * d;
      double* crow = c + i * d;
      for (std::size_t j = 0; j < d; ++j) crow[j] += aik * brow[j];
    }
  }
}

// Solve A X = B in place; A and B are d x d row-major. Partial pivoting.
void solve_sq(double* a, double* b, std::size_t d) {
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t piv = col;
    double best = std::fabs(a[col * d + col]);
    for (std::size_t r = col + 1; r < d; ++r) {
      const double v = std::fabs(a[r * d + col]);
      if (v > best) { best = v; piv = r; }
    }
    if (best == 0.0) throw std::runtime_error("matrix_exponential: singular Pade denominator");
    if (piv != col) {
      for (std::size_t j = 0; j < d; ++j) std::swap(a[col * d + j], a[piv * d + j]);
      for (std::size_t j = 0; j < d; ++j) std::swap(b[col * d + j], b[piv * d + j]);
    }
    const double diag = a[col * d + col];
    for (std::size_t r = col + 1; r < d; ++r) {
      const double f = a[r * d + col] / diag;
      if (f == 0.0) continue;
      for (std::size_t j = col; j < d; ++j) a[r * d + j] -= f * a[col * d + j];
      for (std::size_t j = 0; j < d; ++j) b[r * d + j] -= f * b[col * d + j];
    }
  }
  for (std::size_t col = d; col-- > 0;) {
    const double diag = a[col * d + col];
    for (std::size_t j = 0; j < d; ++j) {
      double s = b[col * d + j];
      for (std::size_t k = col + 1; k < d; ++k) s -= a[col * d + k] * b[k * d + j];
      b[col * d + j] = s / diag;
    }
  }
}

}  // namespace

void matrix_exponential(const double* m, std::size_t d, double* out) {
  if (d == 0) return;
  // Infinity norm controls the scaling power.
  double norm = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < d; ++j) row += std::fabs(m[i * d + j]);
    if (row > norm) norm = row;
  }
  int s = 0;
  if (norm > 0.5) {
    s = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    if (s < 0) s = 0;
  }
  const double scale = std::ldexp(1.0, -s);

  const std::size_t n2 = d * d;
  std::vector<double> a(n2), a2(n2), a4(n2), a6(n2);
  for (std::size_t i = 0; i < n2; ++i) a[i] = m[i] * scale;
  matmul_sq(a.data(), a.data(), d, a2.data());
  matmul_sq(a2.data(), a2.data(), d, a4.data());
  matmul_sq(a4.data(), a2.data(), d, a6.data());

  // Pade(6): N = V + U, D = V - U with U odd, V even in A.
  static constexpr double b0 = 1.0, b1 = 0.5, b2 = 5.0 / 44.0, b3 = 1.0 / 66.0,
                          b4 = 1.0 / 792.0, b5 = 1.0 / 15840.0, b6 = 1.0 / 665280.0;
  std::vector<double> u_poly(n2), u(n2), v(n2);
  for (std::size_t i = 0; i < n2; ++i)
    u_poly[i] = b5 * a4[i] + b3 * a2[i];
  for (std::size_t i = 0; i < d; ++i) u_poly[i * d + i] += b1;
  matmul_sq(a.data(), u_poly.data(), d, u.data());
  for (std::size_t i = 0; i < n2; ++i)
    v[i] = b6 * a6[i] + b4 * a4[i] + b2 * a2[i];
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] += b0;

  std::vector<double> num(n2), den(n2);
  for (std::size_t i = 0; i < n2; ++i) {
    num[i] = v[i] + u[i];
    den[i] = v[i] - u[i];
  }
  solve_sq(den.data(), num.data(), d);

  std::vector<double> tmp(n2);
  for (int k = 0; k < s; ++k) {
    matmul_sq(num.data(), num.data(), d, tmp.data());
    num.swap(tmp);
  }
  std::memcpy(out, num.data(), sizeof(double) * n2);
}

std::vector<double> matrix_exponential(const std::vector<double>& m, std::size_t d) {
  if (m.size() != d * d)
    throw std::invalid_argument("matrix_exponential: size mismatch");
  std::vector<double> out(d * d);
  matrix_exponential(m.data(), d, out.data());
  return out;
}

}  // namespace lidcd
