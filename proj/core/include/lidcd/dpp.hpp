#pragma once

#include <optional>

#include "lidcd/ffn.hpp"

namespace lidcd {

// Dirichlet-process prior over latent interventions: stick-breaking weights
// with scaling alpha, Bernoulli(sigmoid(gamma)) intervention targets, and
// standard-normal embeddings of width h, truncated at K components beyond the
// observational one.
struct DppPrior {
  double alpha = 9.0;
  double gamma = -0.01;
  int h = 264;
  int K = 11;
};

// Fully factorized truncated variational family:
//   q_V(v_k)   = Beta(rho_k w_k, (1 - rho_k) w_k)        k in {0..K}
//   q_U(u_kl)  = N(mu_kl, sigma_kl^2)
//   q_R(r_kj)  = Bern(pi_kj), row 0 frozen to zeros
//   q_Z(z|x,U) proportional to exp(u_z . NN(x; phi_Z) / sqrt(h))
// Free parameters live as unconstrained reals behind sigmoid/softplus links.
class InterventionPosterior {
 public:
  InterventionPosterior() = default;
  InterventionPosterior(ParamStore& store, const DppPrior& prior, int d,
                        bool with_encoder, int encoder_hidden, int encoder_blocks,
                        double encoder_dropout, RngStream& init);

  int K() const { return prior_.K; }
  int components() const { return prior_.K + 1; }
  int h() const { return prior_.h; }
  int d() const { return d_; }
  const DppPrior& prior() const { return prior_; }
  bool has_encoder() const { return encoder_.has_value(); }
  const FfnModule& encoder() const { return *encoder_; }

  // Linked posterior parameters.
  ad::Tensor rho(EvalCtx& ctx) const;           // (K+1) x 1 in (0,1)
  ad::Tensor mass(EvalCtx& ctx) const;          // (K+1) x 1 positive (the w_k)
  ad::Tensor mu(EvalCtx& ctx) const;            // (K+1) x h
  ad::Tensor sigma(EvalCtx& ctx) const;         // (K+1) x h positive
  ad::Tensor target_logits(EvalCtx& ctx) const; // K x d (rows 1..K)
  ad::Tensor target_probs(EvalCtx& ctx) const;  // K x d in (0,1)

  // Closed-form divergences against the generative prior.
  ad::Tensor kl_embedding_rows(EvalCtx& ctx) const;  // (K+1) x 1
  ad::Tensor kl_target_rows(EvalCtx& ctx) const;     // K x 1; requires K >= 1
  ad::Tensor kl_target_total(EvalCtx& ctx) const;    // scalar, 0 when K == 0
  ad::Tensor kl_stick_rows(EvalCtx& ctx) const;      // (K+1) x 1
  // E[log beta_k] under q_V via digamma identities: (K+1) x 1.
  ad::Tensor expected_log_beta(EvalCtx& ctx) const;

  // Reparameterized embedding sample U: (K+1) x h.
  ad::Tensor sample_embeddings(EvalCtx& ctx, RngStream& rng) const;
  // Target sample R: (K+1) x d with a frozen all-zero observational row.
  ad::Tensor sample_targets(EvalCtx& ctx, RngStream& rng, double temperature,
                            bool hard) const;
  // log q_Z(z = k | x, U) for a batch: B x (K+1).
  ad::Tensor assignment_log_probs(EvalCtx& ctx, const ad::Tensor& X,
                                  const ad::Tensor& U) const;
  // Per-sample divergence sum_k q(z_k) (log q(z_k) - E[log beta_k]): B x 1.
  // Accepts hard one-hot rows as q for the observed-assignment case.
  ad::Tensor assignment_divergence_col(EvalCtx& ctx, const ad::Tensor& q,
                                       const ad::Tensor& q_log,
                                       const ad::Tensor& elog_beta) const;

 private:
  DppPrior prior_;
  int d_ = 0;
  int mu_h_ = -1, sigma_raw_h_ = -1, rho_raw_h_ = -1, mass_raw_h_ = -1, pi_raw_h_ = -1;
  std::optional<FfnModule> encoder_;
};

}  // namespace lidcd
