#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lidcd/dataset.hpp"
#include "lidcd/score.hpp"

namespace lidcd {

struct FitSettings {
  Variant variant = Variant::Latent;
  LikelihoodMode likelihood = LikelihoodMode::Imperfect;
  DensityFamily family = DensityFamily::Linear;

  double alpha = 9.0;
  double gamma = -0.01;
  double xi_g = -0.1;
  int h = 264;
  int K = 11;

  int ffn_hidden = 32;
  int ffn_blocks = 2;
  double dropout = 0.1;
  int flow_layers = 2;
  int flow_hidden = 12;
  double sigma_floor = 1e-3;

  double lr = 0.0031622776601683794;  // 10^-2.5
  double weight_decay = 1e-6;
  int batch = 0;  // 0 = full batch
  int epochs_first = 500;
  int epochs_rest = 50;
  bool fixed_epochs = false;  // every subproblem runs epochs_first
  int max_outer = 100;
  double h_tol = 1e-8;
  double temperature = 1.0;
  double edge_threshold = 0.5;
  double val_split = 0.2;

  double al_phi0 = 0.0;
  double al_mu0 = 1e-8;
  double al_eta = 2.0;
  double al_delta = 0.9;

  double kappa = 0.5;
  double label_fraction = 0.0;  // f: observed-label fraction for semi

  std::map<std::string, std::string> echo() const;
};

struct FitReport {
  int d = 0;
  std::vector<double> lambda;           // d x d edge logits
  std::vector<std::uint8_t> adjacency;  // sigma(lambda) > threshold
  bool converged = false;
  bool acyclic_at_threshold = false;
  int outer_iterations = 0;
  std::int64_t steps = 0;
  std::vector<double> loss_trace;  // total objective per inner step
  std::vector<double> nll_trace;
  std::vector<double> h_trace;     // acyclicity at each outer iteration end
  std::vector<double> val_loglik_trace;
  double wall_clock_sec = 0.0;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config_echo;
  std::string error;  // nonempty when the fit aborted

  // Posterior snapshot (variational parameters after training).
  int K = 0, h_dim = 0;
  std::vector<double> post_mu, post_sigma, post_rho, post_mass, post_pi;
};

// Effective supervision for a (dataset, variant) pair.
struct SupervisionPlan {
  Variant variant = Variant::Latent;
  int K_eff = 0;          // posterior truncation actually used
  bool use_labels = false;
  bool use_targets = false;
  bool needs_encoder = false;
};

// Validates that the dataset carries what the variant needs and resolves the
// effective truncation level. Throws std::invalid_argument on mismatch.
SupervisionPlan resolve_variant(const Dataset& ds, Variant variant, int config_K);

// Augmented-Lagrangian outer loop with Adam inner steps. Deterministic given
// (dataset, settings, seed).
FitReport fit(const Dataset& ds, const FitSettings& settings, std::uint64_t seed);

void write_fit_report(const FitReport& report, const std::string& path);
FitReport load_fit_report(const std::string& path);

}  // namespace lidcd
