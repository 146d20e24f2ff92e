#include "lidcd/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace lidcd {

using nlohmann::json;

int Dataset::regimes() const {
  if (labels.has_value()) {
    int mx = 0;
    for (int z : *labels) mx = std::max(mx, z);
    return mx + 1;
  }
  if (manifest.has_value()) return static_cast<int>(manifest->targets.size());
  return 1;
}

void Dataset::normalize() {
  if (normalized) return;
  norm_mean.assign(static_cast<std::size_t>(d), 0.0);
  norm_std.assign(static_cast<std::size_t>(d), 1.0);
  for (int j = 0; j < d; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += at(i, j);
    const double mu = s / n;
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double c = at(i, j) - mu;
      ss += c * c;
    }
    double sd = std::sqrt(ss / n);
    if (sd == 0.0) sd = 1.0;
    norm_mean[static_cast<std::size_t>(j)] = mu;
    norm_std[static_cast<std::size_t>(j)] = sd;
    for (int i = 0; i < n; ++i)
      X[static_cast<std::size_t>(i) * d + j] = (at(i, j) - mu) / sd;
  }
  normalized = true;
}

Dataset Dataset::subset(const std::vector<int>& rows) const {
  Dataset out;
  out.d = d;
  out.n = static_cast<int>(rows.size());
  out.X.reserve(rows.size() * static_cast<std::size_t>(d));
  for (int r : rows) {
    if (r < 0 || r >= n) throw std::out_of_range("Dataset::subset: row out of range");
    out.X.insert(out.X.end(), X.begin() + static_cast<std::size_t>(r) * d,
                 X.begin() + static_cast<std::size_t>(r + 1) * d);
  }
  if (labels.has_value()) {
    std::vector<int> lab;
    lab.reserve(rows.size());
    for (int r : rows) lab.push_back((*labels)[static_cast<std::size_t>(r)]);
    out.labels = std::move(lab);
  }
  if (!observed_mask.empty()) {
    out.observed_mask.reserve(rows.size());
    for (int r : rows) out.observed_mask.push_back(observed_mask[static_cast<std::size_t>(r)]);
  }
  out.manifest = manifest;
  out.norm_mean = norm_mean;
  out.norm_std = norm_std;
  out.normalized = normalized;
  return out;
}

Dataset sample_dataset(const Scm& scm, const std::vector<InterventionSpec>& interventions,
                       int n_total, RngStream& rng) {
  if (interventions.empty() || !interventions.front().empty())
    throw std::invalid_argument("sample_dataset: interventions[0] must be the empty intervention");
  const int regimes = static_cast<int>(interventions.size());
  if (n_total < regimes) throw std::invalid_argument("sample_dataset: too few samples");
  const int base = n_total / regimes;
  const int remainder = n_total - base * regimes;

  Dataset ds;
  ds.d = scm.graph.d;
  ds.n = n_total;
  ds.X.reserve(static_cast<std::size_t>(n_total) * ds.d);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(n_total));
  for (int k = 0; k < regimes; ++k) {
    const int count = base + (k == 0 ? remainder : 0);
    const InterventionSpec* spec = interventions[static_cast<std::size_t>(k)].empty()
                                       ? nullptr
                                       : &interventions[static_cast<std::size_t>(k)];
    for (int i = 0; i < count; ++i) {
      const std::vector<double> x = sample_joint(scm, spec, rng);
      ds.X.insert(ds.X.end(), x.begin(), x.end());
      labels.push_back(k);
    }
  }
  ds.labels = std::move(labels);

  Dataset::Manifest man;
  man.graph = scm.graph;
  man.family = to_string(scm.family);
  for (const InterventionSpec& spec : interventions) {
    man.targets.push_back(spec.targets);
    man.kinds.push_back(spec.empty() ? "none" : to_string(spec.kind));
  }
  ds.manifest = std::move(man);
  ds.normalize();
  return ds;
}

void assign_observed_mask(Dataset& ds, double fraction, RngStream& rng) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("assign_observed_mask: fraction outside [0, 1]");
  ds.observed_mask.assign(static_cast<std::size_t>(ds.n), 0);
  const int count = static_cast<int>(std::floor(fraction * ds.n));
  std::vector<int> perm(static_cast<std::size_t>(ds.n));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = ds.n - 1; i > 0; --i) {
    const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(k)]);
  }
  for (int i = 0; i < count; ++i) ds.observed_mask[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = 1;
}

std::string manifest_path_for(const std::string& csv_path) {
  const std::string suffix = ".csv";
  if (csv_path.size() > suffix.size() &&
      csv_path.compare(csv_path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return csv_path.substr(0, csv_path.size() - suffix.size()) + ".manifest.json";
  return csv_path + ".manifest.json";
}

void save_dataset(const Dataset& ds, const std::string& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + csv_path);
  for (int j = 0; j < ds.d; ++j) {
    if (j) out << ',';
    out << 'x' << (j + 1);
  }
  if (ds.labels.has_value()) out << ",intervention";
  out << '\n';
  char buf[40];
  for (int i = 0; i < ds.n; ++i) {
    for (int j = 0; j < ds.d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.at(i, j));
      if (j) out << ',';
      out << buf;
    }
    if (ds.labels.has_value()) out << ',' << (*ds.labels)[static_cast<std::size_t>(i)];
    out << '\n';
  }
  out.close();

  json man;
  if (ds.manifest.has_value()) {
    man["graph"] = std::vector<int>(ds.manifest->graph.adj.begin(), ds.manifest->graph.adj.end());
    man["targets"] = ds.manifest->targets;
    man["kinds"] = ds.manifest->kinds;
    man["family"] = ds.manifest->family;
  }
  man["d"] = ds.d;
  man["n"] = ds.n;
  man["normalized"] = ds.normalized;
  man["normalization"] = {{"mean", ds.norm_mean}, {"std", ds.norm_std}};
  std::ofstream mout(manifest_path_for(csv_path));
  if (!mout) throw std::runtime_error("save_dataset: cannot open manifest sidecar");
  mout << man.dump(2) << '\n';
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, int line_no) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e)
    throw std::runtime_error("load_csv: non-numeric cell '" + s + "' on line " +
                             std::to_string(line_no));
  return v;
}

}  // namespace

Dataset::Manifest load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("load_manifest: cannot open " + manifest_path);
  json man = json::parse(in);
  Dataset::Manifest m;
  const std::vector<int> flat = man.at("graph").get<std::vector<int>>();
  const int d = man.contains("d") ? man["d"].get<int>()
                                  : static_cast<int>(std::lround(std::sqrt(double(flat.size()))));
  if (static_cast<int>(flat.size()) != d * d)
    throw std::runtime_error("load_manifest: graph size mismatch");
  m.graph = CausalGraph(d);
  for (std::size_t i = 0; i < flat.size(); ++i) m.graph.adj[i] = flat[i] ? 1 : 0;
  if (man.contains("targets")) m.targets = man["targets"].get<std::vector<std::vector<int>>>();
  if (man.contains("kinds")) m.kinds = man["kinds"].get<std::vector<std::string>>();
  m.family = man.value("family", std::string());
  return m;
}

Dataset load_csv(const std::string& csv_path, const LoadOptions& opts) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file");
  const std::vector<std::string> header = split_csv_line(line);
  int label_col = -1;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == "intervention") label_col = static_cast<int>(j);

  Dataset ds;
  ds.d = static_cast<int>(header.size()) - (label_col >= 0 ? 1 : 0);
  if (ds.d < 1) throw std::runtime_error("load_csv: no data columns");
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("load_csv: ragged row on line " + std::to_string(line_no));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (static_cast<int>(j) == label_col) {
        const double v = parse_double(fields[j], line_no);
        const int z = static_cast<int>(v);
        if (v != z || z < 0)
          throw std::runtime_error("load_csv: label out of range on line " + std::to_string(line_no));
        labels.push_back(z);
      } else {
        ds.X.push_back(parse_double(fields[j], line_no));
      }
    }
    ++ds.n;
  }
  if (label_col >= 0) ds.labels = std::move(labels);
  if (opts.require_labels && !ds.labels.has_value())
    throw std::runtime_error("load_csv: labels required but no 'intervention' column present");

  // Optional manifest sidecar.
  std::ifstream min(manifest_path_for(csv_path));
  if (min) {
    json man = json::parse(min);
    if (man.contains("graph")) {
      Dataset::Manifest m;
      const std::vector<int> flat = man["graph"].get<std::vector<int>>();
      const int d = ds.d;
      if (static_cast<int>(flat.size()) != d * d)
        throw std::runtime_error("load_csv: manifest graph size mismatch");
      m.graph = CausalGraph(d);
      for (std::size_t i = 0; i < flat.size(); ++i) m.graph.adj[i] = flat[i] ? 1 : 0;
      m.targets = man["targets"].get<std::vector<std::vector<int>>>();
      m.kinds = man["kinds"].get<std::vector<std::string>>();
      m.family = man.value("family", std::string());
      ds.manifest = std::move(m);
    }
    if (man.contains("normalization")) {
      ds.norm_mean = man["normalization"]["mean"].get<std::vector<double>>();
      ds.norm_std = man["normalization"]["std"].get<std::vector<double>>();
      ds.normalized = man.value("normalized", true);
    }
    if (ds.labels.has_value() && ds.manifest.has_value()) {
      const int r = static_cast<int>(ds.manifest->targets.size());
      for (int z : *ds.labels)
        if (z >= r)
          throw std::runtime_error("load_csv: label out of range for manifest regimes");
    }
  }
  return ds;
}

}  // namespace lidcd
