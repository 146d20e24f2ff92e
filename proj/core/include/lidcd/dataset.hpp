#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lidcd/scm.hpp"

namespace lidcd {

// Sample matrix plus optional per-sample intervention labels and the
// generating ground truth. X is row-major n x d.
struct Dataset {
  int n = 0, d = 0;
  std::vector<double> X;
  std::optional<std::vector<int>> labels;     // regime index in {0..K}
  std::vector<std::uint8_t> observed_mask;    // set O for semi-supervision; empty if unused

  struct Manifest {
    CausalGraph graph;
    std::vector<std::vector<int>> targets;  // per regime, regime 0 empty
    std::vector<std::string> kinds;         // per regime, regime 0 "none"
    std::string family;
  };
  std::optional<Manifest> manifest;

  std::vector<double> norm_mean, norm_std;  // per-variable stats of the raw data
  bool normalized = false;

  double at(int i, int j) const { return X[static_cast<std::size_t>(i) * d + j]; }

  // Number of regimes: from labels when present, else manifest, else 1.
  int regimes() const;

  // Pooled per-variable z-scoring; records the stats. Idempotent.
  void normalize();

  Dataset subset(const std::vector<int>& rows) const;
};

// Ancestral sampling with floor(n / regimes) samples per regime; remainder
// goes to the observational regime. The returned dataset is normalized and
// labeled, with the ground truth recorded in the manifest.
Dataset sample_dataset(const Scm& scm, const std::vector<InterventionSpec>& interventions,
                       int n_total, RngStream& rng);

// Mark the first floor(f * n) rows of a random permutation as observed.
void assign_observed_mask(Dataset& ds, double fraction, RngStream& rng);

// CSV + JSON-sidecar round trip. `csv_path` must end in ".csv"; the manifest
// lands next to it as "<stem>.manifest.json". Values are written with 17
// significant digits so load(save(ds)) is bit-exact.
void save_dataset(const Dataset& ds, const std::string& csv_path);

struct LoadOptions {
  bool require_labels = false;
};
Dataset load_csv(const std::string& csv_path, const LoadOptions& opts = {});

std::string manifest_path_for(const std::string& csv_path);

// Reads just the ground-truth manifest (for evaluation against a report).
Dataset::Manifest load_manifest(const std::string& manifest_path);

}  // namespace lidcd
