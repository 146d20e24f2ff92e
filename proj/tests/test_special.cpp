#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "lidcd/special.hpp"
#include "oracles.hpp"

using namespace lidcd;

TEST_CASE("digamma") {
  // Euler-Mascheroni at 1, and psi(2) = psi(1) + 1.
  CHECK(std::fabs(digamma(1.0) - (-0.57721566490153286)) <= 1e-10);
  CHECK(digamma(2.0) == doctest::Approx(digamma(1.0) + 1.0).epsilon(1e-12));
  RngStream rng(31);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(0.05, 40.0);
    CHECK(std::fabs(digamma(x) - oracles::digamma_ref(x)) <= 1e-8);
  }
  CHECK_THROWS_AS(digamma(0.0), std::domain_error);
  CHECK_THROWS_AS(digamma(-1.5), std::domain_error);
}

TEST_CASE("trigamma") {
  // psi'(1) = pi^2/6.
  CHECK(trigamma(1.0) == doctest::Approx(M_PI * M_PI / 6.0).epsilon(1e-12));
  RngStream rng(32);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(0.1, 30.0);
    CHECK(std::fabs(trigamma(x) - oracles::trigamma_ref(x)) <= 1e-5 * std::max(1.0, trigamma(x)));
  }
}

TEST_CASE("matrix exponential agrees with the truncated power series") {
  RngStream rng(33);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 2 + static_cast<int>(rng.below(5));
    // Keep the infinity norm at or below 2.
    std::vector<double> m(static_cast<std::size_t>(d) * d);
    for (double& v : m) v = rng.uniform(-2.0 / d, 2.0 / d);
    const std::vector<double> em = matrix_exponential(m, static_cast<std::size_t>(d));

    // Series sum_{k<=30} M^k / k!.
    std::vector<double> acc(static_cast<std::size_t>(d) * d, 0.0);
    std::vector<double> term(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) term[static_cast<std::size_t>(i) * d + i] = 1.0;
    double fact = 1.0;
    for (int k = 0; k <= 30; ++k) {
      if (k > 0) {
        fact *= k;
        std::vector<double> next(static_cast<std::size_t>(d) * d, 0.0);
        for (int i = 0; i < d; ++i)
          for (int p = 0; p < d; ++p)
            for (int j = 0; j < d; ++j)
              next[static_cast<std::size_t>(i) * d + j] +=
                  term[static_cast<std::size_t>(i) * d + p] * m[static_cast<std::size_t>(p) * d + j];
        term = next;
      }
      for (std::size_t i = 0; i < acc.size(); ++i)
        acc[i] += term[i] / fact;
    }
    double tr_pade = 0.0, tr_series = 0.0;
    for (int i = 0; i < d; ++i) {
      tr_pade += em[static_cast<std::size_t>(i) * d + i];
      tr_series += acc[static_cast<std::size_t>(i) * d + i];
    }
    CHECK(std::fabs(tr_pade - tr_series) <= 1e-8);
  }
}

TEST_CASE("log_beta") {
  CHECK(log_beta(1.0, 9.0) == doctest::Approx(std::log(1.0 / 9.0)).epsilon(1e-12));
  CHECK(log_beta(2.0, 2.0) == doctest::Approx(std::log(1.0 / 6.0)).epsilon(1e-12));
}
