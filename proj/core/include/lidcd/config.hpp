#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lidcd/trainer.hpp"

namespace lidcd {

// Every knob of a single experiment: data generation, model, optimizer, run
// bookkeeping. Parsed from "key = value" config files with CLI overrides;
// unknown keys are rejected.
struct ExperimentConfig {
  // Data generation.
  int d = 10;
  double e = 1.0;          // expected edges per node
  double edge_prob = -1.0; // >= 0 overrides the e -> p conversion (pairs preset)
  std::string family = "linear";      // linear | nonlinear | nongaussian
  std::string kind = "stochastic";    // atomic | stochastic | imperfect
  int n = 10000;

  // Model and prior.
  std::string variant = "latent";     // latent | unknown | known | observational | semi
  std::string likelihood = "imperfect";
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

  // Optimization.
  double lr = 0.0031622776601683794;  // 10^-2.5
  double weight_decay = 1e-6;
  int batch = 0;
  int epochs_first = 500;
  int epochs_rest = 50;
  bool fixed_epochs = false;
  int max_outer = 100;
  double h_tol = 1e-8;
  double temperature = 1.0;
  double edge_threshold = 0.5;
  double val_split = 0.2;
  double al_phi0 = 0.0;
  double al_mu0 = 1e-8;
  double al_eta = 2.0;
  double al_delta = 0.9;

  // Semi-supervision.
  double kappa = 0.5;
  double f = 0.0;  // observed-label fraction

  // Run bookkeeping.
  std::uint64_t seed = 1;
  std::string name = "run";
  std::string out;  // output root; falls back to $LIDCD_RUNS_ROOT, then ./runs
  bool strict_hparams = true;

  FitSettings fit_settings() const;
  std::map<std::string, std::string> echo() const;
};

// Grid enumeration for the benchmark command.
struct BenchmarkConfig {
  ExperimentConfig base;
  std::vector<std::string> families = {"linear"};
  std::vector<double> es = {1.0};
  std::vector<std::string> kinds = {"stochastic"};
  std::vector<std::string> variants = {"latent", "observational"};
  int scms = 10;
  int workers = 1;
};

// Parsing and validation. Overrides are (key, value) pairs applied after the
// file. validate() throws std::invalid_argument with a descriptive message.
ExperimentConfig parse_experiment_config(
    const std::string& path_or_empty,
    const std::vector<std::pair<std::string, std::string>>& overrides);
BenchmarkConfig parse_benchmark_config(
    const std::string& path_or_empty,
    const std::vector<std::pair<std::string, std::string>>& overrides);

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);
void validate(const ExperimentConfig& cfg);

// Resolved output root: cfg.out, else $LIDCD_RUNS_ROOT, else "runs".
std::string output_root(const ExperimentConfig& cfg);

void write_config_echo(const std::map<std::string, std::string>& echo,
                       const std::string& path);

}  // namespace lidcd
