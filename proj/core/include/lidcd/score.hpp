#pragma once

#include <limits>
#include <string>
#include <vector>

#include "lidcd/densities.hpp"
#include "lidcd/dpp.hpp"

namespace lidcd {

enum class Variant { Latent, Unknown, Known, Observational, Semi };
enum class LikelihoodMode { Imperfect, Perfect };

std::string to_string(Variant v);
std::string to_string(LikelihoodMode m);
Variant variant_from_string(const std::string& s);
LikelihoodMode likelihood_from_string(const std::string& s);

// Relaxed graph posterior: independent edge logits Lambda with the diagonal
// frozen at -40 so self-loop probabilities stay below 1e-7.
class GraphPosterior {
 public:
  static constexpr double kDiagLogit = -40.0;

  GraphPosterior() = default;
  // Edge logits start near zero with a small random spread; an exactly
  // symmetric start leaves two-cycle saddles unbroken under the acyclicity
  // pressure.
  GraphPosterior(ParamStore& store, int d, RngStream& init, double init_std = 0.05);

  int d() const { return d_; }
  int param_handle() const { return lambda_h_; }

  ad::Tensor logits(EvalCtx& ctx) const;      // d x d with frozen diagonal
  ad::Tensor edge_probs(EvalCtx& ctx) const;  // sigmoid of the above
  // Binary straight-through adjacency sample with a zeroed diagonal.
  ad::Tensor sample(EvalCtx& ctx, RngStream& rng, double temperature, bool hard) const;
  // h(Lambda) = tr exp(sigmoid(Lambda)) - d; zero exactly on acyclic supports.
  ad::Tensor acyclicity(EvalCtx& ctx) const;

  // Tape-free evaluations against the current parameter values.
  double acyclicity_value(const ParamStore& store) const;
  std::vector<std::uint8_t> threshold(const ParamStore& store, double prob) const;

 private:
  int d_ = 0;
  int lambda_h_ = -1;
};

// Augmented-Lagrangian multiplier schedule.
struct AlState {
  double phi = 0.0;
  double mu = 1e-8;
  double eta = 2.0;
  double delta = 0.9;
  int t = 0;
  double h_prev = std::numeric_limits<double>::infinity();

  // phi accumulates mu * h every outer iteration; mu grows by eta whenever h
  // failed to shrink below delta * previous h.
  void outer_update(double h);
};

struct LossBreakdown {
  double nll = 0.0;
  double kl = 0.0;
  double l1 = 0.0;
  double al_lin = 0.0;
  double al_quad = 0.0;
  double classifier = 0.0;
  // Parts sum to this in the order nll, kl, l1, al_lin, al_quad, classifier.
  double total = 0.0;
};

struct LossOptions {
  Variant variant = Variant::Latent;
  LikelihoodMode likelihood = LikelihoodMode::Imperfect;
  bool hard = true;  // straight-through discrete samples; false = smooth relaxation
  double temperature = 1.0;
  double xi_g = -0.1;
  double kappa = 0.5;
  long dataset_size = 0;  // N used to scale the global KL terms
};

// Everything trainable, bundled for the loss assembly.
struct ModelState {
  GraphPosterior graph;
  InterventionPosterior post;
  DensityModel densities;
};

struct BatchView {
  const ad::Tensor* X = nullptr;                     // B x d constant tensor
  const std::vector<int>* labels = nullptr;          // regime per row (unknown/known/semi)
  const std::vector<std::uint8_t>* observed = nullptr;  // per-row observed flag (semi)
  const ad::Tensor* known_targets = nullptr;         // (K+1) x d constant (known)
};

struct LossResult {
  ad::Tensor total;
  LossBreakdown parts;
};

// Assembles the minimized objective
//   -log p(x | z, M, G) + Omega(phi) - xi_G ||Lambda||_1
//   + phi_t h(Lambda) + (mu_t / 2) h(Lambda)^2
// for one batch, drawing the graph and latent variables with the
// reparameterization and straight-through estimators. Sample draw order is
// fixed (graph, embeddings, targets, assignments) so variants that share a
// prefix of the draws consume identical randomness.
LossResult build_loss(EvalCtx& ctx, const BatchView& batch, const ModelState& state,
                      const AlState& al, const LossOptions& opts, RngStream& rng);

}  // namespace lidcd
