#include <doctest.h>

#include <cmath>

#include "lidcd/adam.hpp"
#include "lidcd/special.hpp"
#include "lidcd/tensor.hpp"
#include "oracles.hpp"

using namespace lidcd;
using namespace lidcd::ad;

namespace {

std::vector<double> random_vec(int n, RngStream& rng, double lo = -1.5, double hi = 1.5) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Generic FD check: `build` maps leaf tensors to an output tensor; the loss is
// a fixed random weighting of the output so every entry participates.
void check_fd(const char* name,
              const std::vector<std::pair<int, int>>& shapes,
              const std::function<Tensor(Tape&, std::vector<Tensor>&)>& build,
              RngStream& rng, double lo = -1.5, double hi = 1.5, double tol = 1e-4) {
  std::vector<std::vector<double>> values;
  for (const auto& [r, c] : shapes) values.push_back(random_vec(r * c, rng, lo, hi));
  std::vector<double> weights;

  const auto eval = [&](const std::vector<std::vector<double>>& vals, bool want_grads,
                        std::vector<std::vector<double>>* grads) {
    Tape tape;
    std::vector<Tensor> leaves;
    for (std::size_t i = 0; i < shapes.size(); ++i)
      leaves.push_back(tape.leaf(shapes[i].first, shapes[i].second, vals[i]));
    Tensor out = build(tape, leaves);
    if (weights.empty()) {
      RngStream wrng(7, 7);
      weights = random_vec(out.size(), wrng, -1.0, 1.0);
    }
    Tensor loss = sum(mul(out, tape.constant(out.rows(), out.cols(), weights)));
    const double value = loss.scalar();
    if (want_grads) {
      tape.backward(loss);
      grads->clear();
      for (const Tensor& l : leaves) grads->push_back(l.grad());
    }
    return value;
  };

  std::vector<std::vector<double>> grads;
  eval(values, true, &grads);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    std::vector<double> flat = values[i];
    const auto f = [&](const std::vector<double>& x) {
      std::vector<std::vector<double>> vals = values;
      vals[i] = x;
      return eval(vals, false, nullptr);
    };
    const std::vector<double> fd = oracles::finite_diff(f, flat);
    for (std::size_t k = 0; k < fd.size(); ++k) {
      INFO(name << " input " << i << " entry " << k);
      CHECK(oracles::rel_error(grads[i][k], fd[k]) <= tol);
    }
  }
}

}  // namespace

TEST_CASE("forward primitive examples") {
  Tape t;
  CHECK(sigmoid(t.constant_scalar(0.0)).scalar() == doctest::Approx(0.5));
  CHECK(trace_expm(t.zeros(3, 3)).scalar() == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(exp(t.constant_scalar(1.0)).scalar() == doctest::Approx(std::exp(1.0)));
  CHECK(log_sum_exp(t.constant(1, 2, {0.0, 0.0})).scalar() ==
        doctest::Approx(std::log(2.0)));
  Tensor sm = softmax(t.constant(1, 3, {1.0, 1.0, 1.0}));
  for (double v : sm.values()) CHECK(v == doctest::Approx(1.0 / 3));
}

TEST_CASE("shape and finiteness errors") {
  Tape t;
  CHECK_THROWS_AS(add(t.zeros(2, 2), t.zeros(2, 3)), ShapeError);
  CHECK_THROWS_AS(matmul(t.zeros(2, 3), t.zeros(2, 3)), ShapeError);
  CHECK_THROWS_AS(log(t.constant_scalar(-1.0)), NonFiniteError);
  CHECK_THROWS_AS(div(t.ones(1, 1), t.zeros(1, 1)), NonFiniteError);
}

TEST_CASE("backward basics") {
  SUBCASE("x squared") {
    Tape t;
    Tensor x = t.leaf(1, 1, {3.0});
    Tensor loss = square(x);
    t.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0));
  }
  SUBCASE("sigmoid slope at zero") {
    Tape t;
    Tensor x = t.leaf(1, 1, {0.0});
    Tensor loss = sigmoid(x);
    t.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(0.25));
  }
  SUBCASE("backward twice is an error") {
    Tape t;
    Tensor x = t.leaf(1, 1, {1.0});
    Tensor loss = square(x);
    t.backward(loss);
    CHECK_THROWS_AS(t.backward(loss), std::logic_error);
    t.reset();
  }
  SUBCASE("non-scalar loss rejected") {
    Tape t;
    Tensor x = t.leaf(2, 1, {1.0, 2.0});
    CHECK_THROWS_AS(t.backward(square(x)), ShapeError);
  }
}

TEST_CASE("trace of matrix exponential") {
  RngStream rng(42);
  SUBCASE("gradient matches finite differences on a random 4x4") {
    std::vector<double> mv = random_vec(16, rng, -0.6, 0.6);
    Tape t;
    Tensor m = t.leaf(4, 4, mv);
    Tensor f = trace_expm(m);
    t.backward(f);
    const auto fd = oracles::finite_diff(
        [&](const std::vector<double>& x) {
          Tape t2;
          return trace_expm(t2.leaf(4, 4, x)).scalar();
        },
        mv);
    for (int i = 0; i < 16; ++i)
      CHECK(oracles::rel_error(m.grad()[static_cast<std::size_t>(i)], fd[static_cast<std::size_t>(i)]) <= 1e-4);
  }
  SUBCASE("gradient is the transposed exponential") {
    std::vector<double> mv = random_vec(9, rng, -0.5, 0.5);
    Tape t;
    Tensor m = t.leaf(3, 3, mv);
    t.backward(trace_expm(m));
    const std::vector<double> em = matrix_exponential(mv, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(m.grad()[static_cast<std::size_t>(i) * 3 + j] ==
              doctest::Approx(em[static_cast<std::size_t>(j) * 3 + i]).epsilon(1e-10));
  }
}

TEST_CASE("reverse-mode gradients match finite differences across primitives") {
  RngStream rng(202);
  using V = std::vector<Tensor>;
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    check_fd("add", {{2, 3}, {2, 3}}, [](Tape&, V& v) { return add(v[0], v[1]); }, rng);
    check_fd("mul", {{2, 3}, {2, 3}}, [](Tape&, V& v) { return mul(v[0], v[1]); }, rng);
    check_fd("matmul", {{2, 3}, {3, 2}}, [](Tape&, V& v) { return matmul(v[0], v[1]); }, rng);
    check_fd("affine", {{2, 3}, {3, 2}, {1, 2}},
             [](Tape&, V& v) { return affine(v[0], v[1], v[2]); }, rng);
    check_fd("sigmoid", {{2, 2}}, [](Tape&, V& v) { return sigmoid(v[0]); }, rng);
    check_fd("exp", {{2, 2}}, [](Tape&, V& v) { return exp(v[0]); }, rng);
    check_fd("log", {{2, 2}}, [](Tape&, V& v) { return log(v[0]); }, rng, 0.2, 3.0);
    check_fd("sqrt", {{2, 2}}, [](Tape&, V& v) { return sqrt(v[0]); }, rng, 0.2, 3.0);
    check_fd("lse_rows", {{3, 4}}, [](Tape&, V& v) { return logsumexp_rows(v[0]); }, rng);
    check_fd("softmax_rows", {{2, 4}}, [](Tape&, V& v) { return softmax_rows(v[0]); }, rng);
    check_fd("emin", {{2, 3}, {2, 3}}, [](Tape&, V& v) { return emin(v[0], v[1]); }, rng);
    check_fd("emax", {{2, 3}, {2, 3}}, [](Tape&, V& v) { return emax(v[0], v[1]); }, rng);
    check_fd("concat", {{2, 2}, {2, 3}},
             [](Tape&, V& v) { return concat_cols(v[0], v[1]); }, rng);
    check_fd("mask", {{2, 3}}, [](Tape& t, V& v) {
      return mul(v[0], t.constant(2, 3, {1, 0, 1, 0, 1, 0}));
    }, rng);
    check_fd("lgamma", {{2, 2}}, [](Tape&, V& v) { return lgamma(v[0]); }, rng, 0.3, 4.0);
    check_fd("digamma", {{2, 2}}, [](Tape&, V& v) { return digamma(v[0]); }, rng, 0.3, 4.0);
    check_fd("trace_expm", {{3, 3}}, [](Tape&, V& v) { return trace_expm(v[0]); }, rng,
             -0.5, 0.5);
    check_fd("broadcast", {{3, 2}, {1, 2}, {3, 1}}, [](Tape&, V& v) {
      return mul_colvec(add_rowvec(v[0], v[1]), v[2]);
    }, rng);
    check_fd("div", {{2, 2}, {2, 2}}, [](Tape&, V& v) { return div(v[0], v[1]); }, rng,
             0.5, 2.0);
    check_fd("silu_softplus", {{2, 3}}, [](Tape&, V& v) { return silu(softplus(v[0])); },
             rng);
  }
}

TEST_CASE("masking blocks gradients exactly") {
  Tape t;
  Tensor x = t.leaf(2, 3, {1, 2, 3, 4, 5, 6});
  Tensor mask = t.constant(2, 3, {1, 0, 1, 0, 1, 0});
  t.backward(sum(square(mul(x, mask))));
  const std::vector<double>& g = x.grad();
  CHECK(g[1] == 0.0);
  CHECK(g[3] == 0.0);
  CHECK(g[5] == 0.0);
  CHECK(g[0] != 0.0);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient with zero weight decay leaves parameters unchanged") {
    AdamState st;
    st.lr = 0.1;
    st.weight_decay = 0.0;
    std::vector<double> p = {1.0, -2.0};
    adam_step(p, {0.0, 0.0}, st);
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(-2.0).epsilon(1e-15));
  }
  SUBCASE("default decoupled weight decay is 1e-6") {
    AdamState st;
    CHECK(st.weight_decay == doctest::Approx(1e-6));
    st.lr = 0.1;
    std::vector<double> p = {1.0};
    adam_step(p, {0.0}, st);
    CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 1e-6 * 1.0).epsilon(1e-12));
  }
  SUBCASE("one step with unit gradient moves by about lr") {
    AdamState st;
    st.lr = 0.1;
    st.weight_decay = 0.0;
    std::vector<double> p = {0.0};
    adam_step(p, {1.0}, st);
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
  }
  SUBCASE("moment shape mismatch raises") {
    AdamState st;
    st.m = {0.0};
    st.v = {0.0};
    std::vector<double> p = {1.0, 2.0};
    CHECK_THROWS_AS(adam_step(p, {0.0, 0.0}, st), std::invalid_argument);
  }
}

TEST_CASE("reparameterized normal sampling") {
  SUBCASE("negative std rejected, zero std clamps to the mean") {
    Tape t;
    RngStream rng(5);
    Tensor m = t.leaf(1, 1, {2.0});
    Tensor bad = t.constant(1, 1, {-0.1});
    CHECK_THROWS_AS(sample_reparam_normal(m, bad, rng), std::invalid_argument);
    Tensor s = t.constant(1, 1, {0.0});
    Tensor x = sample_reparam_normal(m, s, rng);
    CHECK(x.scalar() == doctest::Approx(2.0).epsilon(1e-4));
  }
  SUBCASE("empirical mean within three standard errors") {
    Tape t;
    RngStream rng(11);
    const int n = 100000;
    Tensor m = t.constant(n, 1, std::vector<double>(n, 0.7));
    Tensor s = t.constant(n, 1, std::vector<double>(n, 1.3));
    Tensor x = sample_reparam_normal(m, s, rng);
    const Tensor avg = mean(x);
    const double se = 1.3 / std::sqrt(double(n));
    CHECK(std::fabs(avg.scalar() - 0.7) <= 3 * se);
  }
  SUBCASE("gradient of a sample w.r.t. the mean is one") {
    Tape t;
    RngStream rng(3);
    Tensor m = t.leaf(4, 1, {0.0, 1.0, -1.0, 2.0});
    Tensor s = t.constant(4, 1, std::vector<double>(4, 0.5));
    t.backward(sum(sample_reparam_normal(m, s, rng)));
    for (double g : m.grad()) CHECK(g == doctest::Approx(1.0));
  }
}

TEST_CASE("gumbel softmax") {
  SUBCASE("hard samples are exactly binary") {
    Tape t;
    RngStream rng(21);
    Tensor logits = t.leaf(4, 4, random_vec(16, rng));
    Tensor a = gumbel_softmax_binary(logits, 1.0, true, rng);
    for (double v : a.values()) CHECK((v == 0.0 || v == 1.0));
    Tensor z = gumbel_softmax(t.leaf(5, 3, random_vec(15, rng)), 1.0, true, rng);
    for (int i = 0; i < 5; ++i) {
      double row = 0;
      for (int k = 0; k < 3; ++k) row += z.at(i, k);
      CHECK(row == doctest::Approx(1.0));
    }
  }
  SUBCASE("very high temperature approaches the uniform simplex in expectation") {
    Tape t;
    RngStream rng(22);
    Tensor logits = t.constant(1, 4, {3.0, -1.0, 0.5, 2.0});
    std::vector<double> acc(4, 0.0);
    const int n = 4000;
    for (int i = 0; i < n; ++i) {
      Tensor y = gumbel_softmax(logits, 1e6, false, rng);
      for (int k = 0; k < 4; ++k) acc[static_cast<std::size_t>(k)] += y.at(0, k);
    }
    for (double a : acc) CHECK(a / n == doctest::Approx(0.25).epsilon(0.02));
  }
  SUBCASE("saturated logits pick the hot coordinate") {
    Tape t;
    RngStream rng(23);
    Tensor logits = t.constant(1, 2, {10.0, -10.0});
    int hits = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      Tensor y = gumbel_softmax(logits, 1.0, true, rng);
      if (y.at(0, 0) == 1.0 && y.at(0, 1) == 0.0) ++hits;
    }
    CHECK(double(hits) / n >= 0.999);
  }
  SUBCASE("straight-through gradient is nonzero") {
    Tape t;
    RngStream rng(24);
    Tensor logits = t.leaf(2, 2, {0.3, -0.2, 0.1, 0.4});
    Tensor a = gumbel_softmax_binary(logits, 1.0, true, rng);
    t.backward(sum(mul(a, t.constant(2, 2, {1.0, 2.0, 3.0, 4.0}))));
    double norm = 0;
    for (double g : logits.grad()) norm += std::fabs(g);
    CHECK(norm > 0.0);
  }
  SUBCASE("hard binary frequency matches sigmoid of the logit") {
    Tape t;
    RngStream rng(25);
    Tensor logits = t.constant(1, 1, {0.7});
    int ones = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      Tensor y = gumbel_softmax_binary(logits, 1.0, true, rng);
      ones += y.scalar() == 1.0 ? 1 : 0;
    }
    const double p = 1.0 / (1.0 + std::exp(-0.7));
    CHECK(double(ones) / n == doctest::Approx(p).epsilon(0.03));
  }
}
