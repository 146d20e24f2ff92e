#include <doctest.h>

#include <cmath>

#include "lidcd/dpp.hpp"
#include "lidcd/special.hpp"
#include "oracles.hpp"

using namespace lidcd;
using namespace lidcd::ad;

namespace {

double softplus_inv(double y) { return y > 30 ? y : std::log(std::expm1(y)); }
double logit(double p) { return std::log(p / (1 - p)); }

struct PostRig {
  ParamStore store;
  RngStream init{77, 0};
  InterventionPosterior post;
  PostRig(double alpha, double gamma, int h, int K, int d, bool encoder = false)
      : post(store, DppPrior{alpha, gamma, h, K}, d, encoder, 8, 1, 0.0, init) {}

  Param& param(const std::string& name) {
    for (Param& p : store.entries())
      if (p.name == name) return p;
    throw std::runtime_error("no param " + name);
  }
};

}  // namespace

TEST_CASE("embedding KL") {
  SUBCASE("prior-matching posterior gives zero") {
    PostRig rig(9.0, -0.01, 4, 2, 3);
    std::fill(rig.param("post.mu").value.begin(), rig.param("post.mu").value.end(), 0.0);
    std::fill(rig.param("post.sigma_raw").value.begin(), rig.param("post.sigma_raw").value.end(),
              softplus_inv(1.0 - 1e-6));
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    for (double v : rig.post.kl_embedding_rows(ctx).values())
      CHECK(std::fabs(v) <= 1e-9);
  }
  SUBCASE("unit mean, unit sigma, one dimension gives one half") {
    PostRig rig(9.0, -0.01, 1, 0, 2);
    rig.param("post.mu").value = {1.0};
    rig.param("post.sigma_raw").value = {softplus_inv(1.0 - 1e-6)};
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    CHECK(rig.post.kl_embedding_rows(ctx).scalar() == doctest::Approx(0.5).epsilon(1e-8));
  }
  SUBCASE("matches a Monte Carlo estimate") {
    PostRig rig(9.0, -0.01, 3, 0, 2);
    rig.param("post.mu").value = {0.4, -0.8, 1.2};
    rig.param("post.sigma_raw").value = {softplus_inv(0.7), softplus_inv(1.4), softplus_inv(0.9)};
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    const double closed = rig.post.kl_embedding_rows(ctx).scalar();

    const double mu[3] = {0.4, -0.8, 1.2};
    const double sg[3] = {0.7 + 1e-6, 1.4 + 1e-6, 0.9 + 1e-6};
    RngStream rng(101);
    double acc = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      for (int l = 0; l < 3; ++l) {
        const double x = mu[l] + sg[l] * rng.normal();
        const double lq = -std::log(sg[l]) - 0.5 * std::pow((x - mu[l]) / sg[l], 2);
        const double lp = -0.5 * x * x;
        acc += lq - lp;
      }
    }
    CHECK(std::fabs(closed - acc / n) <= 1e-2);
  }
}

TEST_CASE("target KL") {
  SUBCASE("posterior equal to the prior gives zero") {
    PostRig rig(9.0, -0.01, 2, 2, 3);
    // pi_raw initializes at gamma, i.e. pi = sigmoid(gamma).
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    for (double v : rig.post.kl_target_rows(ctx).values()) CHECK(std::fabs(v) <= 1e-12);
  }
  SUBCASE("half-half against a zero-logit prior is zero") {
    PostRig rig(9.0, 0.0, 2, 1, 1);
    rig.param("post.pi_raw").value = {0.0};
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    CHECK(std::fabs(rig.post.kl_target_rows(ctx).scalar()) <= 1e-12);
  }
  SUBCASE("agrees with the two-term Bernoulli KL to 1e-12") {
    RngStream rng(102);
    for (int rep = 0; rep < 200; ++rep) {
      const double pi = rng.uniform(0.02, 0.98);
      const double gamma = rng.uniform(-2.0, 2.0);
      PostRig rig(9.0, gamma, 2, 1, 1);
      rig.param("post.pi_raw").value = {logit(pi)};
      Tape tape;
      EvalCtx ctx(tape, rig.store, false, 0, 0);
      const double got = rig.post.kl_target_rows(ctx).scalar();
      const double sg = 1.0 / (1.0 + std::exp(-gamma));
      const double want = pi * std::log(pi / sg) + (1 - pi) * std::log((1 - pi) / (1 - sg));
      CHECK(std::fabs(got - want) <= 1e-12);
    }
  }
  SUBCASE("pinned example: pi=0.9, gamma=-0.01") {
    PostRig rig(9.0, -0.01, 2, 1, 1);
    rig.param("post.pi_raw").value = {logit(0.9)};
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    const double sg = 1.0 / (1.0 + std::exp(0.01));
    const double want = 0.9 * std::log(0.9 / sg) + 0.1 * std::log(0.1 / (1 - sg));
    CHECK(rig.post.kl_target_rows(ctx).scalar() == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("stick KL") {
  SUBCASE("Beta(1, alpha) posterior gives zero") {
    const double alpha = 9.0;
    PostRig rig(alpha, -0.01, 2, 1, 2);
    // rho w = 1 and (1-rho) w = alpha is exactly the initialization.
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    for (double v : rig.post.kl_stick_rows(ctx).values()) CHECK(std::fabs(v) <= 1e-9);
  }
  SUBCASE("matches quadrature of KL(Beta(2,2) || Beta(1,9))") {
    PostRig rig(9.0, -0.01, 2, 0, 2);
    rig.param("post.rho_raw").value = {logit(0.5)};
    rig.param("post.mass_raw").value = {softplus_inv(4.0 - 1e-6)};
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    const double got = rig.post.kl_stick_rows(ctx).scalar();
    const double quad = oracles::simpson(
        [](double x) {
          const double lq = oracles::log_beta_pdf(x, 2.0, 2.0);
          const double lp = oracles::log_beta_pdf(x, 1.0, 9.0);
          return std::exp(lq) * (lq - lp);
        },
        1e-9, 1.0 - 1e-9, 200000);
    CHECK(std::fabs(got - quad) <= 1e-6);
  }
  SUBCASE("nonnegative over random shapes and scales") {
    RngStream rng(103);
    for (int rep = 0; rep < 100; ++rep) {
      const double alpha = rng.uniform(0.5, 20.0);
      PostRig rig(alpha, -0.01, 2, 99, 2);
      Param& rho = rig.param("post.rho_raw");
      Param& mass = rig.param("post.mass_raw");
      for (double& v : rho.value) v = logit(rng.uniform(0.05, 0.95));
      for (double& v : mass.value) v = softplus_inv(rng.uniform(0.2, 30.0));
      Tape tape;
      EvalCtx ctx(tape, rig.store, false, 0, 0);
      for (double v : rig.post.kl_stick_rows(ctx).values()) CHECK(v >= -1e-9);
    }
  }
}

TEST_CASE("expected log stick weight") {
  SUBCASE("component zero reduces to psi(rho w) - psi(w)") {
    PostRig rig(9.0, -0.01, 2, 3, 2);
    Param& rho = rig.param("post.rho_raw");
    Param& mass = rig.param("post.mass_raw");
    for (double& v : rho.value) v = logit(0.3);
    for (double& v : mass.value) v = softplus_inv(5.0);
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    const double got = rig.post.expected_log_beta(ctx).values()[0];
    const double a = 0.3 * (5.0 + 1e-6);
    const double w = 5.0 + 1e-6;
    CHECK(got == doctest::Approx(digamma(a) - digamma(w)).epsilon(1e-9));
  }
  SUBCASE("rho=1/2, w=2 identity: E[log beta_1] = -2") {
    PostRig rig(9.0, -0.01, 2, 1, 2);
    rig.param("post.rho_raw").value = {logit(0.5), logit(0.5)};
    rig.param("post.mass_raw").value = {softplus_inv(2.0 - 2e-6), softplus_inv(2.0 - 2e-6)};
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    CHECK(rig.post.expected_log_beta(ctx).values()[1] == doctest::Approx(-2.0).epsilon(1e-6));
  }
  SUBCASE("matches Monte Carlo over Beta draws") {
    PostRig rig(9.0, -0.01, 2, 2, 2);
    const double rhos[3] = {0.4, 0.25, 0.6};
    const double ws[3] = {3.0, 8.0, 2.0};
    Param& rho = rig.param("post.rho_raw");
    Param& mass = rig.param("post.mass_raw");
    for (int k = 0; k < 3; ++k) {
      rho.value[static_cast<std::size_t>(k)] = logit(rhos[k]);
      mass.value[static_cast<std::size_t>(k)] = softplus_inv(ws[k] - 1e-6);
    }
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    const std::vector<double> got = rig.post.expected_log_beta(ctx).values();

    RngStream rng(104);
    std::vector<double> acc(3, 0.0);
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      double log_beta_k = 0.0, log_prod = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double v = oracles::sample_beta(rhos[k] * ws[k], (1 - rhos[k]) * ws[k], rng);
        log_beta_k = log_prod + std::log(v);
        log_prod += std::log1p(-v);
        acc[static_cast<std::size_t>(k)] += log_beta_k;
      }
    }
    for (int k = 0; k < 3; ++k)
      CHECK(std::fabs(got[static_cast<std::size_t>(k)] - acc[static_cast<std::size_t>(k)] / n) <= 1e-2);
  }
  SUBCASE("monotone decreasing for identical rows") {
    PostRig rig(9.0, -0.01, 2, 6, 2);
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    const std::vector<double> e = rig.post.expected_log_beta(ctx).values();
    for (std::size_t k = 1; k < e.size(); ++k) CHECK(e[k] < e[k - 1]);
  }
}

TEST_CASE("assignment posterior") {
  SUBCASE("single-component divergence is -E[log beta_0], nonnegative") {
    PostRig rig(9.0, -0.01, 3, 0, 2);
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    Tensor q = tape.ones(4, 1);
    Tensor q_log = tape.zeros(4, 1);
    Tensor elog = rig.post.expected_log_beta(ctx);
    Tensor div = rig.post.assignment_divergence_col(ctx, q, q_log, elog);
    for (double v : div.values()) {
      CHECK(v == doctest::Approx(-elog.values()[0]).epsilon(1e-12));
      CHECK(v >= 0.0);
    }
  }
  SUBCASE("uniform two-component hand value") {
    PostRig rig(9.0, -0.01, 3, 1, 2);
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    Tensor q = tape.constant(1, 2, {0.5, 0.5});
    Tensor q_log = tape.constant(1, 2, {std::log(0.5), std::log(0.5)});
    Tensor elog = rig.post.expected_log_beta(ctx);
    const double want = 0.5 * (std::log(0.5) - elog.values()[0]) +
                        0.5 * (std::log(0.5) - elog.values()[1]);
    CHECK(rig.post.assignment_divergence_col(ctx, q, q_log, elog).scalar() ==
          doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("pathwise estimator is stable across seeds") {
    PostRig rig(9.0, -0.01, 6, 2, 3, /*encoder=*/true);
    const std::vector<double> xv = {0.4, -0.2, 1.1};
    const auto estimate = [&](std::uint64_t seed) {
      std::vector<double> vals;
      RngStream rng(seed);
      for (int s = 0; s < 10000; ++s) {
        Tape tape;
        EvalCtx ctx(tape, rig.store, false, 0, 0);
        Tensor X = tape.constant(1, 3, xv);
        Tensor U = rig.post.sample_embeddings(ctx, rng);
        Tensor q_log = rig.post.assignment_log_probs(ctx, X, U);
        Tensor q = exp(q_log);
        Tensor elog = rig.post.expected_log_beta(ctx);
        vals.push_back(rig.post.assignment_divergence_col(ctx, q, q_log, elog).scalar());
      }
      return std::pair<double, double>{oracles::mean_of(vals),
                                       oracles::stddev_of(vals) / std::sqrt(10000.0)};
    };
    const auto [m1, se1] = estimate(11);
    const auto [m2, se2] = estimate(12);
    CHECK(std::fabs(m1 - m2) <= 3.0 * std::sqrt(se1 * se1 + se2 * se2));
  }
}

TEST_CASE("latent samples") {
  PostRig rig(9.0, -0.01, 4, 3, 5, /*encoder=*/true);
  RngStream rng(105);
  SUBCASE("observational target row stays zero") {
    for (int rep = 0; rep < 50; ++rep) {
      Tape tape;
      EvalCtx ctx(tape, rig.store, false, 0, 0);
      Tensor R = rig.post.sample_targets(ctx, rng, 1.0, true);
      for (int j = 0; j < 5; ++j) CHECK(R.at(0, j) == 0.0);
      for (double v : R.values()) CHECK((v == 0.0 || v == 1.0));
    }
  }
  SUBCASE("assignment samples are one-hot with the right frequencies") {
    Tape tape;
    EvalCtx ctx(tape, rig.store, false, 0, 0);
    Tensor q_log = tape.constant(1, 4, {std::log(0.4), std::log(0.3), std::log(0.2), std::log(0.1)});
    std::vector<double> freq(4, 0.0);
    const int n = 100000;
    Tape stape;
    Tensor logits = stape.constant(1, 4, q_log.values());
    for (int i = 0; i < n; ++i) {
      Tensor z = gumbel_softmax(logits, 1.0, true, rng);
      double row = 0.0;
      for (int k = 0; k < 4; ++k) {
        row += z.at(0, k);
        freq[static_cast<std::size_t>(k)] += z.at(0, k);
      }
      CHECK(row == 1.0);
    }
    const double want[4] = {0.4, 0.3, 0.2, 0.1};
    double tv = 0.0;
    for (int k = 0; k < 4; ++k) tv += 0.5 * std::fabs(freq[static_cast<std::size_t>(k)] / n - want[k]);
    CHECK(tv <= 0.02);
  }
  SUBCASE("stick-breaking weights from sampled sticks stay in the simplex") {
    RngStream beta_rng(106);
    for (int rep = 0; rep < 2000; ++rep) {
      double prod = 1.0, total = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double v = oracles::sample_beta(1.0, 9.0, beta_rng);
        const double beta_k = v * prod;
        CHECK(beta_k >= 0.0);
        CHECK(beta_k <= 1.0);
        total += beta_k;
        prod *= 1.0 - v;
      }
      CHECK(total <= 1.0 + 1e-12);
    }
  }
}
