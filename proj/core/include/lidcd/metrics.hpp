#pragma once

#include <map>
#include <string>
#include <vector>

#include "lidcd/graph.hpp"

namespace lidcd {

// Edge-level comparison of an estimated graph against the truth.
//
// Counting convention: a reversed edge is charged to both fn and fp, so
//   tp + fn = |E_true|,   tp + fp = |E_est|,   hd = fn + fp,
// and hd equals the entrywise Hamming distance of the adjacency matrices
// (2 per reversal, 1 per missing or extra edge). f1 = 2 tp / (2 tp + fp + fn)
// under that convention; f1_strict excludes reversals from fp and fn.
struct GraphMetrics {
  int hd = 0;
  int tp = 0;
  int fn = 0;
  int fp = 0;
  int rev = 0;
  double f1 = 0.0;
  double f1_strict = 0.0;
  int true_edges = 0;
  int est_edges = 0;
};

GraphMetrics evaluate(const CausalGraph& estimated, const CausalGraph& truth);
GraphMetrics evaluate(const std::vector<std::uint8_t>& estimated,
                      const std::vector<std::uint8_t>& truth, int d);

struct MetricsSummary {
  int count = 0;
  double hd_mean = 0.0, hd_std = 0.0;
  double tp_mean = 0.0, tp_std = 0.0;
  double fn_mean = 0.0, fn_std = 0.0;
  double fp_mean = 0.0, fp_std = 0.0;
  double rev_mean = 0.0, rev_std = 0.0;
  double f1_mean = 0.0, f1_std = 0.0;
};

// Mean and sample standard deviation per metric (std 0 for a single run).
MetricsSummary aggregate(const std::vector<GraphMetrics>& runs);

// "5.9 ± 6.2" with one decimal, the benchmark-table cell format.
std::string format_cell(double mean, double std);

// Hamming-distance histogram (bin -> count).
std::map<int, int> hd_histogram(const std::vector<GraphMetrics>& runs);
void write_histogram_csv(const std::map<int, int>& hist, const std::string& path);

void write_metrics_json(const GraphMetrics& m, const std::string& path);
std::string metrics_to_text(const GraphMetrics& m);

}  // namespace lidcd
