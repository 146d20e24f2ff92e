#include "lidcd/harness.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace lidcd {

namespace fs = std::filesystem;

namespace {

enum DataStreamId : std::uint64_t {
  kGraphStream = 11,
  kScmStream = 12,
  kInterventionStream = 13,
  kSampleStream = 14,
};

}  // namespace

Dataset generate_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  RngStream graph_rng(seed, kGraphStream);
  CausalGraph graph = cfg.edge_prob >= 0.0
                          ? generate_graph_with_edge_prob(cfg.d, cfg.edge_prob, graph_rng)
                          : generate_graph(cfg.d, cfg.e, graph_rng);
  RngStream scm_rng(seed, kScmStream);
  const Scm scm = sample_scm(graph, family_from_string(cfg.family), scm_rng);

  RngStream int_rng(seed, kInterventionStream);
  std::vector<InterventionSpec> interventions;
  interventions.push_back(InterventionSpec{});  // observational regime
  const InterventionKind kind = intervention_kind_from_string(cfg.kind);
  for (int j = 0; j < cfg.d; ++j)
    interventions.push_back(apply_intervention(scm, kind, j, int_rng));

  RngStream data_rng(seed, kSampleStream);
  return sample_dataset(scm, interventions, cfg.n, data_rng);
}

namespace {

RunOutcome finish_run(const ExperimentConfig& cfg, const Dataset& ds, std::uint64_t seed,
                      const std::string& out_dir, FitReport report) {
  RunOutcome out;
  const std::map<std::string, std::string> echo = cfg.echo();
  report.config_echo.insert(echo.begin(), echo.end());
  report.config_echo["seed"] = std::to_string(seed);
  out.report = std::move(report);
  if (!out.report.error.empty()) {
    out.error = out.report.error;
  } else if (ds.manifest.has_value()) {
    out.metrics = evaluate(out.report.adjacency, ds.manifest->graph.adj, ds.d);
  }
  out.ok = out.report.error.empty();
  if (!out_dir.empty()) {
    const fs::path dir = fs::path(out_dir) / std::to_string(seed);
    fs::create_directories(dir);
    out.run_dir = dir.string();
    write_config_echo(out.report.config_echo, (dir / "config.txt").string());
    write_fit_report(out.report, (dir / "fitreport.json").string());
    if (out.metrics.has_value())
      write_metrics_json(*out.metrics, (dir / "metrics.json").string());
  }
  return out;
}

}  // namespace

RunOutcome run_fit_eval(const ExperimentConfig& cfg, const Dataset& ds,
                        std::uint64_t seed, const std::string& out_dir) {
  try {
    FitReport report = fit(ds, cfg.fit_settings(), seed);
    return finish_run(cfg, ds, seed, out_dir, std::move(report));
  } catch (const std::exception& e) {
    RunOutcome out;
    out.ok = false;
    out.error = e.what();
    return out;
  }
}

RunOutcome run_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                          const std::string& out_dir) {
  try {
    const Dataset ds = generate_dataset(cfg, seed);
    return run_fit_eval(cfg, ds, seed, out_dir);
  } catch (const std::exception& e) {
    RunOutcome out;
    out.ok = false;
    out.error = e.what();
    return out;
  }
}

void parallel_for(int jobs, int workers, const std::function<void(int)>& fn) {
  if (jobs <= 0) return;
  workers = std::max(1, std::min(workers, jobs));
  if (workers == 1) {
    for (int i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= jobs) return;
        fn(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, const std::string& out_dir) {
  BenchmarkResult result;
  // Enumerate cells.
  for (const std::string& family : cfg.families)
    for (double e : cfg.es)
      for (const std::string& kind : cfg.kinds) {
        BenchmarkCell cell;
        cell.family = family;
        cell.e = e;
        cell.kind = kind;
        cell.variants = cfg.variants;
        cell.per_variant.resize(cfg.variants.size());
        result.cells.push_back(std::move(cell));
      }

  struct Job {
    int cell = 0, variant = 0, scm = 0;
  };
  std::vector<Job> jobs;
  for (int c = 0; c < static_cast<int>(result.cells.size()); ++c)
    for (int v = 0; v < static_cast<int>(cfg.variants.size()); ++v)
      for (int s = 0; s < cfg.scms; ++s) jobs.push_back(Job{c, v, s});

  std::mutex mu;
  parallel_for(static_cast<int>(jobs.size()), cfg.workers, [&](int idx) {
    const Job job = jobs[static_cast<std::size_t>(idx)];
    BenchmarkCell& cell = result.cells[static_cast<std::size_t>(job.cell)];
    ExperimentConfig run_cfg = cfg.base;
    run_cfg.family = cell.family;
    run_cfg.e = cell.e;
    run_cfg.kind = cell.kind;
    run_cfg.variant = cfg.variants[static_cast<std::size_t>(job.variant)];
    // Same SCM seed across variants within a cell; distinct across cells.
    const std::uint64_t data_seed =
        combine_keys(cfg.base.seed, combine_keys(static_cast<std::uint64_t>(job.cell),
                                                 static_cast<std::uint64_t>(job.scm)));
    std::string run_dir;
    if (!out_dir.empty()) {
      std::ostringstream os;
      os << cell.family << "_e" << cell.e << "_" << cell.kind << "/" << run_cfg.variant;
      run_dir = (fs::path(out_dir) / os.str()).string();
    }
    RunOutcome outcome = run_experiment(run_cfg, data_seed, run_dir);
    std::lock_guard<std::mutex> lock(mu);
    if (outcome.ok && outcome.metrics.has_value()) {
      cell.per_variant[static_cast<std::size_t>(job.variant)].push_back(*outcome.metrics);
    } else {
      ++result.failed_runs;
      cell.errors.push_back(run_cfg.variant + "/scm" + std::to_string(job.scm) + ": " +
                            (outcome.error.empty() ? "no metrics" : outcome.error));
    }
  });

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream table((fs::path(out_dir) / "table.txt").string());
    table << format_benchmark_table(result);
    for (const BenchmarkCell& cell : result.cells) {
      for (std::size_t v = 0; v < cell.variants.size(); ++v) {
        if (cell.per_variant[v].empty()) continue;
        std::ostringstream os;
        os << "hist_" << cell.family << "_e" << cell.e << "_" << cell.kind << "_"
           << cell.variants[v] << ".csv";
        write_histogram_csv(hd_histogram(cell.per_variant[v]),
                            (fs::path(out_dir) / os.str()).string());
      }
    }
  }
  return result;
}

std::string format_benchmark_table(const BenchmarkResult& result) {
  std::ostringstream os;
  if (result.cells.empty()) return "";
  const std::vector<std::string>& variants = result.cells.front().variants;
  os << std::left << std::setw(16) << "family" << std::setw(6) << "e" << std::setw(12)
     << "kind";
  for (const std::string& v : variants) os << std::setw(16) << v;
  os << '\n';
  for (const BenchmarkCell& cell : result.cells) {
    os << std::left << std::setw(16) << cell.family << std::setw(6) << cell.e
       << std::setw(12) << cell.kind;
    for (std::size_t v = 0; v < cell.variants.size(); ++v) {
      if (cell.per_variant[v].empty()) {
        os << std::setw(16) << "-";
      } else {
        const MetricsSummary s = aggregate(cell.per_variant[v]);
        os << std::setw(16) << format_cell(s.hd_mean, s.hd_std);
      }
    }
    os << '\n';
  }
  if (result.failed_runs > 0) os << "# failed runs: " << result.failed_runs << '\n';
  return os.str();
}

}  // namespace lidcd
