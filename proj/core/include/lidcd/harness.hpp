#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lidcd/config.hpp"
#include "lidcd/metrics.hpp"

namespace lidcd {

// Synthetic dataset per config: Erdos-Renyi graph, mechanisms per family, one
// intervention per variable of the configured kind, floor(n/(d+1)) samples
// per regime, pooled z-scoring. Deterministic given (config, seed).
Dataset generate_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

struct RunOutcome {
  bool ok = false;
  std::string error;
  FitReport report;
  std::optional<GraphMetrics> metrics;
  std::string run_dir;  // empty when nothing was written
};

// generate -> fit -> eval for one seed. When out_dir is nonempty, writes
// config.txt, fitreport.json, metrics.json under <out_dir>/<seed>/.
RunOutcome run_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                          const std::string& out_dir);
// Same but on a supplied dataset (external data or a shared SCM draw).
RunOutcome run_fit_eval(const ExperimentConfig& cfg, const Dataset& ds,
                        std::uint64_t seed, const std::string& out_dir);

// Bounded worker pool over independent jobs.
void parallel_for(int jobs, int workers, const std::function<void(int)>& fn);

struct BenchmarkCell {
  std::string family;
  double e = 0.0;
  std::string kind;
  // Per variant, metrics across SCM repetitions (same SCMs for each variant).
  std::vector<std::string> variants;
  std::vector<std::vector<GraphMetrics>> per_variant;
  std::vector<std::string> errors;
};

struct BenchmarkResult {
  std::vector<BenchmarkCell> cells;
  int failed_runs = 0;
};

// Full grid: for every (family, e, kind) cell, `scms` seeded SCMs fitted under
// every variant. Emits a benchmark-table text file, per-cell histogram CSVs,
// and per-run artifacts under out_dir (when nonempty).
BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, const std::string& out_dir);

// Rows (family x e x kind), columns variants, cells "mean ± std" of HD.
std::string format_benchmark_table(const BenchmarkResult& result);

}  // namespace lidcd
