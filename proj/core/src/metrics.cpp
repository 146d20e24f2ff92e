#include "lidcd/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace lidcd {

GraphMetrics evaluate(const CausalGraph& estimated, const CausalGraph& truth) {
  if (estimated.d != truth.d)
    throw std::invalid_argument("evaluate: graphs have different dimension");
  const int d = truth.d;
  for (int i = 0; i < d; ++i) {
    if (estimated.edge(i, i) || truth.edge(i, i))
      throw std::invalid_argument("evaluate: adjacency has a nonzero diagonal");
  }
  GraphMetrics m;
  m.true_edges = truth.edge_count();
  m.est_edges = estimated.edge_count();
  int missing = 0, extra = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      const bool e = estimated.edge(i, j);
      const bool t = truth.edge(i, j);
      if (e && t) ++m.tp;
      if (e != t) ++m.hd;
      if (t && !e && !estimated.edge(j, i)) ++missing;
      if (e && !t && !truth.edge(j, i)) ++extra;
      if (i < j) {
        // Reversed pair: the truth orients one way, the estimate only the other.
        const bool fwd_t = truth.edge(i, j), bwd_t = truth.edge(j, i);
        const bool fwd_e = estimated.edge(i, j), bwd_e = estimated.edge(j, i);
        if ((fwd_t && !bwd_t && bwd_e && !fwd_e) || (bwd_t && !fwd_t && fwd_e && !bwd_e))
          ++m.rev;
      }
    }
  }
  m.fn = missing + m.rev;
  m.fp = extra + m.rev;
  const auto f1_of = [&](int fp, int fn) {
    const int denom = 2 * m.tp + fp + fn;
    if (denom == 0) return m.true_edges == 0 && m.est_edges == 0 ? 1.0 : 0.0;
    return 2.0 * m.tp / denom;
  };
  m.f1 = f1_of(m.fp, m.fn);
  m.f1_strict = f1_of(extra, missing);
  return m;
}

GraphMetrics evaluate(const std::vector<std::uint8_t>& estimated,
                      const std::vector<std::uint8_t>& truth, int d) {
  if (estimated.size() != static_cast<std::size_t>(d) * d ||
      truth.size() != static_cast<std::size_t>(d) * d)
    throw std::invalid_argument("evaluate: adjacency size mismatch");
  CausalGraph ge(d), gt(d);
  ge.adj = estimated;
  gt.adj = truth;
  return evaluate(ge, gt);
}

namespace {

void mean_std(const std::vector<double>& xs, double& mean, double& std) {
  const int n = static_cast<int>(xs.size());
  double s = 0.0;
  for (double x : xs) s += x;
  mean = s / n;
  if (n < 2) {
    std = 0.0;
    return;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  std = std::sqrt(ss / (n - 1));
}

}  // namespace

MetricsSummary aggregate(const std::vector<GraphMetrics>& runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate: no runs");
  MetricsSummary s;
  s.count = static_cast<int>(runs.size());
  std::vector<double> v(runs.size());
  const auto fill = [&](auto get, double& mean, double& std) {
    for (std::size_t i = 0; i < runs.size(); ++i) v[i] = get(runs[i]);
    mean_std(v, mean, std);
  };
  fill([](const GraphMetrics& m) { return double(m.hd); }, s.hd_mean, s.hd_std);
  fill([](const GraphMetrics& m) { return double(m.tp); }, s.tp_mean, s.tp_std);
  fill([](const GraphMetrics& m) { return double(m.fn); }, s.fn_mean, s.fn_std);
  fill([](const GraphMetrics& m) { return double(m.fp); }, s.fp_mean, s.fp_std);
  fill([](const GraphMetrics& m) { return double(m.rev); }, s.rev_mean, s.rev_std);
  fill([](const GraphMetrics& m) { return m.f1; }, s.f1_mean, s.f1_std);
  return s;
}

std::string format_cell(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f ± %.1f", mean, std);
  return buf;
}

std::map<int, int> hd_histogram(const std::vector<GraphMetrics>& runs) {
  std::map<int, int> hist;
  for (const GraphMetrics& m : runs) ++hist[m.hd];
  return hist;
}

void write_histogram_csv(const std::map<int, int>& hist, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_histogram_csv: cannot open " + path);
  out << "bin,count\n";
  for (const auto& [bin, count] : hist) out << bin << ',' << count << '\n';
}

void write_metrics_json(const GraphMetrics& m, const std::string& path) {
  nlohmann::json j;
  j["hd"] = m.hd;
  j["tp"] = m.tp;
  j["fn"] = m.fn;
  j["fp"] = m.fp;
  j["rev"] = m.rev;
  j["f1"] = m.f1;
  j["f1_strict"] = m.f1_strict;
  j["true_edges"] = m.true_edges;
  j["est_edges"] = m.est_edges;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_metrics_json: cannot open " + path);
  out << j.dump(2) << '\n';
}

std::string metrics_to_text(const GraphMetrics& m) {
  std::ostringstream os;
  os << "hd=" << m.hd << " tp=" << m.tp << " fn=" << m.fn << " fp=" << m.fp
     << " rev=" << m.rev << " f1=" << m.f1;
  return os.str();
}

}  // namespace lidcd
