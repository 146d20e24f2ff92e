#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "lidcd/dataset.hpp"
#include "oracles.hpp"

using namespace lidcd;

TEST_CASE("graph generation") {
  SUBCASE("always acyclic") {
    RngStream rng(1);
    for (int i = 0; i < 500; ++i) {
      CausalGraph g = generate_graph(8, 1.5, rng);
      CHECK(g.is_acyclic());
      for (int j = 0; j < g.d; ++j) CHECK(!g.edge(j, j));
    }
  }
  SUBCASE("two-node pairs preset: each of the three graphs has probability 1/3") {
    RngStream rng(2);
    int fwd = 0, bwd = 0, none = 0, edges = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      CausalGraph g = generate_graph_with_edge_prob(2, 2.0 / 3.0, rng);
      if (g.edge(0, 1)) ++fwd;
      else if (g.edge(1, 0)) ++bwd;
      else ++none;
      edges += g.edge_count();
    }
    // Empirical edge frequency 2/3, split evenly across directions.
    CHECK(double(edges) / n == doctest::Approx(2.0 / 3.0).epsilon(0.03));
    CHECK(double(fwd) / n == doctest::Approx(1.0 / 3.0).epsilon(0.08));
    CHECK(double(bwd) / n == doctest::Approx(1.0 / 3.0).epsilon(0.08));
    CHECK(double(none) / n == doctest::Approx(1.0 / 3.0).epsilon(0.08));
  }
  SUBCASE("zero edge probability gives the empty graph") {
    RngStream rng(3);
    CausalGraph g = generate_graph_with_edge_prob(6, 0.0, rng);
    CHECK(g.edge_count() == 0);
  }
  SUBCASE("d=10 e=1: mean edge count matches the binomial within 3 sigma") {
    RngStream rng(4);
    const int n = 10000;
    long total = 0;
    for (int i = 0; i < n; ++i) total += generate_graph(10, 1.0, rng).edge_count();
    const double p = 2.0 / 9.0;
    const double mean = 45.0 * p;  // 10 expected edges
    const double sd = std::sqrt(45.0 * p * (1 - p));
    const double se = sd / std::sqrt(double(n));
    CHECK(std::fabs(double(total) / n - mean) <= 3 * se);
  }
  SUBCASE("parameter validation") {
    RngStream rng(5);
    CHECK_THROWS_AS(generate_graph(1, 0.5, rng), std::invalid_argument);
    CHECK_THROWS_AS(generate_graph(10, 0.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(generate_graph(10, 5.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(generate_graph_with_edge_prob(4, 1.5, rng), std::invalid_argument);
  }
}

TEST_CASE("scm sampling statistics") {
  SUBCASE("root variable marginal variance equals the noise variance") {
    RngStream rng(6);
    CausalGraph g(3);
    g.set_edge(0, 1, true);
    const Scm scm = sample_scm(g, Family::LinearGauss, rng);
    std::vector<double> roots;
    RngStream srng(7);
    for (int i = 0; i < 20000; ++i) roots.push_back(sample_joint(scm, nullptr, srng)[2]);
    const double sd = oracles::stddev_of(roots);
    CHECK(sd * sd == doctest::Approx(0.015).epsilon(0.05));
    CHECK(oracles::mean_of(roots) == doctest::Approx(0.0).epsilon(0.01));
  }
  SUBCASE("mechanism weights have variance 2.0") {
    RngStream rng(8);
    CausalGraph g(2);
    g.set_edge(0, 1, true);
    std::vector<double> ws;
    for (int i = 0; i < 10000; ++i) {
      const Scm scm = sample_scm(g, Family::LinearGauss, rng);
      ws.push_back(scm.assignments[1].lin_w[0]);
    }
    const double sd = oracles::stddev_of(ws);
    CHECK(sd * sd == doctest::Approx(2.0).epsilon(0.06));
  }
  SUBCASE("linear child of a fixed parent has mean w * parent + b") {
    RngStream rng(9);
    CausalGraph g(2);
    g.set_edge(0, 1, true);
    const Scm scm = sample_scm(g, Family::LinearGauss, rng);
    const double w = scm.assignments[1].lin_w[0];
    const double b = scm.assignments[1].lin_b;
    std::vector<double> x = {1.7, 0.0};
    CHECK(scm.assignments[1].mechanism(x) == doctest::Approx(w * 1.7 + b).epsilon(1e-12));
  }
  SUBCASE("sampling respects the graph: non-parents cannot move a mechanism") {
    RngStream rng(10);
    for (int rep = 0; rep < 20; ++rep) {
      CausalGraph g = generate_graph(5, 1.0, rng);
      for (Family fam : {Family::LinearGauss, Family::NonlinGauss, Family::NonlinNonGauss}) {
        const Scm scm = sample_scm(g, fam, rng);
        for (int j = 0; j < 5; ++j) {
          for (int i = 0; i < 5; ++i) {
            if (i == j || g.edge(i, j)) continue;
            std::vector<double> x(5, 0.3);
            const double base = scm.assignments[static_cast<std::size_t>(j)].mechanism(x);
            x[static_cast<std::size_t>(i)] = -4.2;
            CHECK(scm.assignments[static_cast<std::size_t>(j)].mechanism(x) == base);
          }
        }
      }
    }
  }
}

TEST_CASE("interventions") {
  RngStream rng(11);
  CausalGraph g(2);
  g.set_edge(0, 1, true);
  const Scm scm = sample_scm(g, Family::LinearGauss, rng);

  SUBCASE("atomic levels live in the two-sided band") {
    RngStream irng(12);
    for (int i = 0; i < 10000; ++i) {
      const InterventionSpec spec = apply_intervention(scm, InterventionKind::Atomic, 1, irng);
      const double v = spec.replacements[0].const_value;
      const double a = std::fabs(v);
      CHECK(a >= 1.2);
      CHECK(a <= 2.2);
    }
  }
  SUBCASE("stochastic intervention decouples the target from its parents") {
    RngStream irng(13);
    const InterventionSpec spec = apply_intervention(scm, InterventionKind::Stochastic, 1, irng);
    RngStream srng(14);
    std::vector<double> xs, ys;
    for (int i = 0; i < 10000; ++i) {
      const std::vector<double> x = sample_joint(scm, &spec, srng);
      xs.push_back(x[0]);
      ys.push_back(x[1]);
    }
    const double mx = oracles::mean_of(xs), my = oracles::mean_of(ys);
    double cov = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) cov += (xs[i] - mx) * (ys[i] - my);
    cov /= xs.size();
    const double corr = cov / (oracles::stddev_of(xs) * oracles::stddev_of(ys));
    CHECK(std::fabs(corr) <= 0.05);
  }
  SUBCASE("imperfect intervention keeps a strong parent dependence") {
    // Hand-built 2-node SCM with a large weight; the replacement keeps the
    // parent set, and pinning its resampled weight makes the correlation
    // analytically predictable.
    Scm strong = scm;
    strong.assignments[1].lin_w = {5.0};
    RngStream irng(15);
    InterventionSpec spec =
        apply_intervention(strong, InterventionKind::Imperfect, 1, irng);
    CHECK(spec.replacements[0].parents == std::vector<int>{0});
    spec.replacements[0].lin_w = {5.0};
    RngStream srng(16);
    std::vector<double> xs, ys;
    for (int i = 0; i < 10000; ++i) {
      const std::vector<double> x = sample_joint(strong, &spec, srng);
      xs.push_back(x[0]);
      ys.push_back(x[1]);
    }
    const double mx = oracles::mean_of(xs), my = oracles::mean_of(ys);
    double cov = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) cov += (xs[i] - mx) * (ys[i] - my);
    cov /= xs.size();
    const double corr = cov / (oracles::stddev_of(xs) * oracles::stddev_of(ys));
    CHECK(std::fabs(corr) >= 0.5);
  }
  SUBCASE("interventions never add parents") {
    RngStream irng(17);
    for (InterventionKind k : {InterventionKind::Atomic, InterventionKind::Stochastic,
                               InterventionKind::Imperfect}) {
      const InterventionSpec spec = apply_intervention(scm, k, 1, irng);
      const std::vector<int> orig = scm.assignments[1].active_parents();
      for (int p : spec.replacements[0].active_parents())
        CHECK(std::find(orig.begin(), orig.end(), p) != orig.end());
    }
  }
}

TEST_CASE("dataset sampling") {
  RngStream rng(18);
  CausalGraph g(2);
  g.set_edge(0, 1, true);
  const Scm scm = sample_scm(g, Family::LinearGauss, rng);
  std::vector<InterventionSpec> specs;
  specs.push_back(InterventionSpec{});
  RngStream irng(19);
  specs.push_back(apply_intervention(scm, InterventionKind::Stochastic, 0, irng));
  specs.push_back(apply_intervention(scm, InterventionKind::Stochastic, 1, irng));

  SUBCASE("999 samples over 3 regimes gives 333 each") {
    RngStream drng(20);
    const Dataset ds = sample_dataset(scm, specs, 999, drng);
    std::vector<int> counts(3, 0);
    for (int z : *ds.labels) ++counts[static_cast<std::size_t>(z)];
    CHECK(counts[0] == 333);
    CHECK(counts[1] == 333);
    CHECK(counts[2] == 333);
  }
  SUBCASE("remainder lands on the observational regime") {
    RngStream drng(21);
    const Dataset ds = sample_dataset(scm, specs, 1000, drng);
    std::vector<int> counts(3, 0);
    for (int z : *ds.labels) ++counts[static_cast<std::size_t>(z)];
    CHECK(counts[0] == 334);
    CHECK(counts[1] == 333);
    CHECK(counts[2] == 333);
  }
  SUBCASE("pooled columns are z-scored") {
    RngStream drng(22);
    const Dataset ds = sample_dataset(scm, specs, 999, drng);
    for (int j = 0; j < ds.d; ++j) {
      double s = 0, ss = 0;
      for (int i = 0; i < ds.n; ++i) s += ds.at(i, j);
      const double mean = s / ds.n;
      for (int i = 0; i < ds.n; ++i) ss += (ds.at(i, j) - mean) * (ds.at(i, j) - mean);
      CHECK(std::fabs(mean) <= 1e-9);
      CHECK(std::fabs(std::sqrt(ss / ds.n) - 1.0) <= 1e-9);
    }
  }
  SUBCASE("observed mask fraction zero leaves the observed set empty") {
    RngStream drng(23);
    Dataset ds = sample_dataset(scm, specs, 300, drng);
    RngStream mrng(24);
    assign_observed_mask(ds, 0.0, mrng);
    int observed = 0;
    for (std::uint8_t m : ds.observed_mask) observed += m;
    CHECK(observed == 0);
    assign_observed_mask(ds, 0.0, mrng);  // idempotent under reassignment
    RngStream mrng2(25);
    assign_observed_mask(ds, 0.4, mrng2);
    observed = 0;
    for (std::uint8_t m : ds.observed_mask) observed += m;
    CHECK(observed == 120);
  }
  SUBCASE("missing empty observational intervention is rejected") {
    RngStream drng(26);
    std::vector<InterventionSpec> bad(specs.begin() + 1, specs.end());
    CHECK_THROWS_AS(sample_dataset(scm, bad, 300, drng), std::invalid_argument);
  }
}

TEST_CASE("csv round trip") {
  namespace fs = std::filesystem;
  RngStream rng(27);
  CausalGraph g(3);
  g.set_edge(0, 1, true);
  g.set_edge(1, 2, true);
  const Scm scm = sample_scm(g, Family::NonlinGauss, rng);
  std::vector<InterventionSpec> specs;
  specs.push_back(InterventionSpec{});
  RngStream irng(28);
  for (int j = 0; j < 3; ++j)
    specs.push_back(apply_intervention(scm, InterventionKind::Imperfect, j, irng));
  RngStream drng(29);
  const Dataset ds = sample_dataset(scm, specs, 200, drng);

  const fs::path dir = fs::temp_directory_path() / "lidcd_test_csv";
  fs::create_directories(dir);
  const std::string path = (dir / "ds.csv").string();
  save_dataset(ds, path);

  SUBCASE("values and labels survive exactly") {
    const Dataset back = load_csv(path);
    REQUIRE(back.n == ds.n);
    REQUIRE(back.d == ds.d);
    for (std::size_t i = 0; i < ds.X.size(); ++i) CHECK(back.X[i] == ds.X[i]);
    REQUIRE(back.labels.has_value());
    CHECK(*back.labels == *ds.labels);
    REQUIRE(back.manifest.has_value());
    CHECK(back.manifest->graph.adj == ds.manifest->graph.adj);
    CHECK(back.manifest->targets == ds.manifest->targets);
    CHECK(back.manifest->kinds == ds.manifest->kinds);
    CHECK(back.norm_mean == ds.norm_mean);
    CHECK(back.normalized);
  }
  SUBCASE("missing label column loads unlabeled") {
    const std::string path2 = (dir / "nolabel.csv").string();
    std::FILE* f = std::fopen(path2.c_str(), "w");
    std::fputs("x1,x2\n0.5,1.5\n-0.25,2\n", f);
    std::fclose(f);
    const Dataset back = load_csv(path2);
    CHECK(!back.labels.has_value());
    CHECK(back.n == 2);
    CHECK(back.d == 2);
    CHECK(back.at(1, 1) == 2.0);
  }
  SUBCASE("ragged and non-numeric rows are rejected") {
    const std::string path3 = (dir / "bad.csv").string();
    std::FILE* f = std::fopen(path3.c_str(), "w");
    std::fputs("x1,x2\n1.0\n", f);
    std::fclose(f);
    CHECK_THROWS_AS(load_csv(path3), std::runtime_error);
    f = std::fopen(path3.c_str(), "w");
    std::fputs("x1,x2\n1.0,abc\n", f);
    std::fclose(f);
    CHECK_THROWS_AS(load_csv(path3), std::runtime_error);
  }
}
