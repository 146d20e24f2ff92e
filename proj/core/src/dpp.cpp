#include "lidcd/dpp.hpp"

#include <cmath>
#include <stdexcept>

namespace lidcd {

using namespace ad;

namespace {

double softplus_inverse(double y) {
  // log(e^y - 1), stable for large y.
  if (y > 30.0) return y;
  return std::log(std::expm1(y));
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

InterventionPosterior::InterventionPosterior(ParamStore& store, const DppPrior& prior,
                                             int d, bool with_encoder, int encoder_hidden,
                                             int encoder_blocks, double encoder_dropout,
                                             RngStream& init)
    : prior_(prior), d_(d) {
  if (prior.K < 0) throw std::invalid_argument("InterventionPosterior: K must be >= 0");
  if (!(prior.alpha > 0.0)) throw std::invalid_argument("InterventionPosterior: alpha must be > 0");
  const int R = prior.K + 1;

  // Prior-matching initialization: Beta(rho w, (1-rho) w) = Beta(1, alpha),
  // pi = sigmoid(gamma), embeddings near zero with unit scale.
  std::vector<double> mu0(static_cast<std::size_t>(R) * prior.h);
  for (double& v : mu0) v = init.normal(0.0, 0.1);
  mu_h_ = store.add("post.mu", R, prior.h, std::move(mu0));
  sigma_raw_h_ = store.add("post.sigma_raw", R, prior.h,
                           std::vector<double>(static_cast<std::size_t>(R) * prior.h,
                                               softplus_inverse(1.0)));
  rho_raw_h_ = store.add("post.rho_raw", R, 1,
                         std::vector<double>(static_cast<std::size_t>(R),
                                             logit(1.0 / (1.0 + prior.alpha))));
  mass_raw_h_ = store.add("post.mass_raw", R, 1,
                          std::vector<double>(static_cast<std::size_t>(R),
                                              softplus_inverse(1.0 + prior.alpha)));
  if (prior.K > 0) {
    pi_raw_h_ = store.add("post.pi_raw", prior.K, d,
                          std::vector<double>(static_cast<std::size_t>(prior.K) * d,
                                              prior.gamma));
  }
  if (with_encoder) {
    FfnConfig fc;
    fc.in = d;
    fc.hidden = encoder_hidden;
    fc.blocks = encoder_blocks;
    fc.out = prior.h;
    fc.dropout = encoder_dropout;
    RngStream sub = init.substream(0x5eedu);
    encoder_.emplace(store, "encoder", fc, sub, /*module_id=*/0);
  }
}

Tensor InterventionPosterior::rho(EvalCtx& ctx) const { return sigmoid(ctx.param(rho_raw_h_)); }

Tensor InterventionPosterior::mass(EvalCtx& ctx) const {
  return add_scalar(softplus(ctx.param(mass_raw_h_)), 1e-6);
}

Tensor InterventionPosterior::mu(EvalCtx& ctx) const { return ctx.param(mu_h_); }

Tensor InterventionPosterior::sigma(EvalCtx& ctx) const {
  return add_scalar(softplus(ctx.param(sigma_raw_h_)), 1e-6);
}

Tensor InterventionPosterior::target_logits(EvalCtx& ctx) const {
  if (prior_.K == 0) throw std::logic_error("target_logits: no intervention components");
  return ctx.param(pi_raw_h_);
}

Tensor InterventionPosterior::target_probs(EvalCtx& ctx) const {
  return sigmoid(target_logits(ctx));
}

Tensor InterventionPosterior::kl_embedding_rows(EvalCtx& ctx) const {
  Tensor m = mu(ctx);
  Tensor s = sigma(ctx);
  // sum_l (sigma^2 + mu^2 - 1)/2 - log sigma
  Tensor terms = sub(mul_scalar(add_scalar(add(square(s), square(m)), -1.0), 0.5), log(s));
  return sum_rows(terms);
}

Tensor InterventionPosterior::kl_target_rows(EvalCtx& ctx) const {
  Tensor l = target_logits(ctx);
  Tensor p = sigmoid(l);
  // pi (logit(pi) - gamma) + log((1-pi)/(1-sigmoid(gamma))), written with
  // -softplus for the log terms so saturated logits stay finite.
  const double sp_gamma = std::log1p(std::exp(prior_.gamma));
  Tensor terms = add_scalar(sub(mul(p, add_scalar(l, -prior_.gamma)), softplus(l)), sp_gamma);
  return sum_rows(terms);
}

Tensor InterventionPosterior::kl_target_total(EvalCtx& ctx) const {
  if (prior_.K == 0) return ctx.tape().constant_scalar(0.0);
  return sum(kl_target_rows(ctx));
}

Tensor InterventionPosterior::kl_stick_rows(EvalCtx& ctx) const {
  Tensor r = rho(ctx);
  Tensor w = mass(ctx);
  Tensor a = mul(r, w);
  Tensor b = mul(add_scalar(neg(r), 1.0), w);
  Tensor ab = add(a, b);
  const double alpha = prior_.alpha;
  // KL(Beta(a,b) || Beta(1,alpha)) with log B(1,alpha) = -log(alpha).
  Tensor log_b_ab = sub(add(lgamma(a), lgamma(b)), lgamma(ab));
  Tensor term = add_scalar(neg(log_b_ab), -std::log(alpha));
  term = add(term, mul(add_scalar(a, -1.0), digamma(a)));
  term = add(term, mul(add_scalar(b, -alpha), digamma(b)));
  term = add(term, mul(add_scalar(neg(ab), 1.0 + alpha), digamma(ab)));
  return term;
}

Tensor InterventionPosterior::expected_log_beta(EvalCtx& ctx) const {
  Tensor r = rho(ctx);
  Tensor w = mass(ctx);
  Tensor a = mul(r, w);
  Tensor b = mul(add_scalar(neg(r), 1.0), w);
  Tensor da = digamma(a);
  Tensor db = digamma(b);
  Tensor dw = digamma(w);
  // E[log beta_k] = psi(a_k) + sum_{k'<k} psi(b_k') - sum_{k'<=k} psi(w_k').
  const int R = components();
  std::vector<double> strict(static_cast<std::size_t>(R) * R, 0.0);
  std::vector<double> incl(static_cast<std::size_t>(R) * R, 0.0);
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < R; ++j) {
      if (j < i) strict[static_cast<std::size_t>(i) * R + j] = 1.0;
      if (j <= i) incl[static_cast<std::size_t>(i) * R + j] = 1.0;
    }
  Tensor lower_strict = ctx.tape().constant(R, R, std::move(strict));
  Tensor lower_incl = ctx.tape().constant(R, R, std::move(incl));
  return add(da, sub(matmul(lower_strict, db), matmul(lower_incl, dw)));
}

Tensor InterventionPosterior::sample_embeddings(EvalCtx& ctx, RngStream& rng) const {
  return sample_reparam_normal(mu(ctx), sigma(ctx), rng);
}

Tensor InterventionPosterior::sample_targets(EvalCtx& ctx, RngStream& rng,
                                             double temperature, bool hard) const {
  Tensor zero_row = ctx.tape().zeros(1, d_);
  if (prior_.K == 0) return zero_row;
  Tensor sampled = gumbel_softmax_binary(target_logits(ctx), temperature, hard, rng);
  return concat_rows(zero_row, sampled);
}

Tensor InterventionPosterior::assignment_log_probs(EvalCtx& ctx, const Tensor& X,
                                                   const Tensor& U) const {
  if (!encoder_.has_value())
    throw std::logic_error("assignment_log_probs: posterior built without an encoder");
  Tensor feat = encoder_->forward(ctx, X);                      // B x h
  Tensor logits = mul_scalar(matmul(feat, transpose(U)),
                             1.0 / std::sqrt(static_cast<double>(prior_.h)));
  return add_colvec(logits, neg(logsumexp_rows(logits)));
}

Tensor InterventionPosterior::assignment_divergence_col(EvalCtx& ctx, const Tensor& q,
                                                        const Tensor& q_log,
                                                        const Tensor& elog_beta) const {
  (void)ctx;
  Tensor diff = add_rowvec(q_log, neg(transpose(elog_beta)));
  return sum_rows(mul(q, diff));
}

}  // namespace lidcd
