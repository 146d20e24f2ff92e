#include "lidcd/score.hpp"

#include <cmath>
#include <stdexcept>

#include "lidcd/special.hpp"

namespace lidcd {

using namespace ad;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Latent: return "latent";
    case Variant::Unknown: return "unknown";
    case Variant::Known: return "known";
    case Variant::Observational: return "observational";
    case Variant::Semi: return "semi";
  }
  return "?";
}

std::string to_string(LikelihoodMode m) {
  return m == LikelihoodMode::Imperfect ? "imperfect" : "perfect";
}

Variant variant_from_string(const std::string& s) {
  if (s == "latent") return Variant::Latent;
  if (s == "unknown") return Variant::Unknown;
  if (s == "known") return Variant::Known;
  if (s == "observational") return Variant::Observational;
  if (s == "semi") return Variant::Semi;
  throw std::invalid_argument("unknown variant: " + s);
}

LikelihoodMode likelihood_from_string(const std::string& s) {
  if (s == "imperfect") return LikelihoodMode::Imperfect;
  if (s == "perfect") return LikelihoodMode::Perfect;
  throw std::invalid_argument("unknown likelihood mode: " + s);
}

GraphPosterior::GraphPosterior(ParamStore& store, int d, RngStream& init, double init_std)
    : d_(d) {
  if (d < 1) throw std::invalid_argument("GraphPosterior: d must be >= 1");
  std::vector<double> lam(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) lam[static_cast<std::size_t>(i) * d + j] = init.normal(0.0, init_std);
  lambda_h_ = store.add("graph.lambda", d, d, std::move(lam));
}

Tensor GraphPosterior::logits(EvalCtx& ctx) const {
  Tensor lam = ctx.param(lambda_h_);
  Tensor eye = ctx.tape().eye(d_);
  Tensor offdiag = add_scalar(neg(eye), 1.0);
  return add(mul(lam, offdiag), mul_scalar(eye, kDiagLogit));
}

Tensor GraphPosterior::edge_probs(EvalCtx& ctx) const { return sigmoid(logits(ctx)); }

Tensor GraphPosterior::sample(EvalCtx& ctx, RngStream& rng, double temperature,
                              bool hard) const {
  Tensor s = gumbel_softmax_binary(logits(ctx), temperature, hard, rng);
  Tensor offdiag = add_scalar(neg(ctx.tape().eye(d_)), 1.0);
  return mul(s, offdiag);
}

Tensor GraphPosterior::acyclicity(EvalCtx& ctx) const {
  return add_scalar(trace_expm(edge_probs(ctx)), -static_cast<double>(d_));
}

double GraphPosterior::acyclicity_value(const ParamStore& store) const {
  const Param& p = store.at(lambda_h_);
  std::vector<double> probs(p.value.size());
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double x = p.value[i];
    probs[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  for (int i = 0; i < d_; ++i) {
    const double diag = 1.0 / (1.0 + std::exp(-kDiagLogit));
    probs[static_cast<std::size_t>(i) * d_ + i] = diag;
  }
  const std::vector<double> em = matrix_exponential(probs, static_cast<std::size_t>(d_));
  double tr = 0.0;
  for (int i = 0; i < d_; ++i) tr += em[static_cast<std::size_t>(i) * d_ + i];
  return tr - d_;
}

std::vector<std::uint8_t> GraphPosterior::threshold(const ParamStore& store,
                                                    double prob) const {
  const Param& p = store.at(lambda_h_);
  const double cut = std::log(prob / (1.0 - prob));  // sigma(lambda) > prob
  std::vector<std::uint8_t> adj(p.value.size(), 0);
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < d_; ++j)
      if (i != j && p.value[static_cast<std::size_t>(i) * d_ + j] > cut)
        adj[static_cast<std::size_t>(i) * d_ + j] = 1;
  return adj;
}

void AlState::outer_update(double h) {
  phi += mu * h;
  if (!(h <= delta * h_prev)) mu *= eta;
  h_prev = h;
  t += 1;
}

namespace {

// One-hot rows for the given labels.
Tensor onehot_rows(Tape& tape, const std::vector<int>& labels, int classes) {
  const int B = static_cast<int>(labels.size());
  std::vector<double> v(static_cast<std::size_t>(B) * classes, 0.0);
  for (int i = 0; i < B; ++i) {
    const int z = labels[static_cast<std::size_t>(i)];
    if (z < 0 || z >= classes)
      throw std::invalid_argument("build_loss: label " + std::to_string(z) +
                                  " outside the " + std::to_string(classes) +
                                  "-component posterior");
    v[static_cast<std::size_t>(i) * classes + z] = 1.0;
  }
  return tape.constant(B, classes, std::move(v));
}

// Gumbel-softmax assignment sample where only unobserved rows draw noise and
// observed rows are replaced by their label one-hot. With an empty observed
// set this consumes exactly the randomness of a plain row-wise sample.
Tensor sample_assignments_masked(EvalCtx& ctx, const Tensor& q_log,
                                 const std::vector<std::uint8_t>* observed,
                                 const std::vector<int>* labels, double temperature,
                                 bool hard, RngStream& rng) {
  Tape& tape = ctx.tape();
  const int B = q_log.rows(), R = q_log.cols();
  std::vector<double> noise(static_cast<std::size_t>(B) * R, 0.0);
  std::vector<double> unobs(static_cast<std::size_t>(B), 1.0);
  bool any_unobserved = false;
  for (int i = 0; i < B; ++i) {
    const bool obs = observed != nullptr && (*observed)[static_cast<std::size_t>(i)] != 0;
    if (obs) {
      unobs[static_cast<std::size_t>(i)] = 0.0;
      continue;
    }
    any_unobserved = true;
    for (int k = 0; k < R; ++k)
      noise[static_cast<std::size_t>(i) * R + k] = rng.gumbel();
  }
  Tensor sampled;
  if (any_unobserved) {
    Tensor g = tape.constant(B, R, std::move(noise));
    Tensor soft = softmax_rows(mul_scalar(add(q_log, g), 1.0 / temperature));
    sampled = hard ? straight_through_onehot_rows(soft) : soft;
  } else {
    sampled = tape.zeros(B, R);
  }
  if (observed == nullptr) return sampled;

  std::vector<int> safe_labels(static_cast<std::size_t>(B), 0);
  for (int i = 0; i < B; ++i)
    if ((*observed)[static_cast<std::size_t>(i)] != 0)
      safe_labels[static_cast<std::size_t>(i)] = (*labels)[static_cast<std::size_t>(i)];
  Tensor obs_onehot = onehot_rows(tape, safe_labels, R);
  std::vector<double> obs_mask(static_cast<std::size_t>(B));
  for (int i = 0; i < B; ++i)
    obs_mask[static_cast<std::size_t>(i)] = 1.0 - unobs[static_cast<std::size_t>(i)];
  Tensor m_unobs = tape.constant(B, 1, std::move(unobs));
  Tensor m_obs = tape.constant(B, 1, std::move(obs_mask));
  // Erase observed rows of the onehot where unobserved and vice versa.
  return add(mul_colvec(sampled, m_unobs), mul_colvec(obs_onehot, m_obs));
}

}  // namespace

LossResult build_loss(EvalCtx& ctx, const BatchView& batch, const ModelState& state,
                      const AlState& al, const LossOptions& opts, RngStream& rng) {
  Tape& tape = ctx.tape();
  const Tensor& X = *batch.X;
  const int B = X.rows();
  const int d = state.graph.d();
  const int R = state.post.components();
  if (X.cols() != d) throw ShapeError("build_loss: batch width != d");
  if (opts.dataset_size <= 0)
    throw std::invalid_argument("build_loss: dataset_size must be positive");

  const bool needs_labels = opts.variant == Variant::Unknown ||
                            opts.variant == Variant::Known;
  if ((needs_labels || opts.variant == Variant::Semi) && batch.labels == nullptr)
    throw std::invalid_argument("build_loss: variant requires labels");
  if (opts.variant == Variant::Known && batch.known_targets == nullptr)
    throw std::invalid_argument("build_loss: known variant requires target matrix");
  if (opts.variant == Variant::Semi && batch.observed == nullptr)
    throw std::invalid_argument("build_loss: semi variant requires an observed mask");
  if (opts.variant == Variant::Observational && R != 1)
    throw std::invalid_argument("build_loss: observational variant expects K == 0");

  // Fixed draw order: graph, embeddings, targets, assignments.
  Tensor A = state.graph.sample(ctx, rng, opts.temperature, opts.hard);
  Tensor U = state.post.sample_embeddings(ctx, rng);
  Tensor R_m;
  const bool targets_observed = opts.variant == Variant::Known;
  if (targets_observed) {
    R_m = *batch.known_targets;
  } else {
    R_m = state.post.sample_targets(ctx, rng, opts.temperature, opts.hard);
  }

  // Assignments z and the per-sample divergence inputs.
  Tensor elog_beta = state.post.expected_log_beta(ctx);
  Tensor Z;          // B x R selector used by the likelihood
  Tensor div_col;    // B x 1 assignment divergence
  Tensor q_log;      // defined for latent/semi
  const bool uses_encoder = opts.variant == Variant::Latent || opts.variant == Variant::Semi;
  if (uses_encoder) {
    q_log = state.post.assignment_log_probs(ctx, X, U);
    Tensor q = exp(q_log);
    const std::vector<std::uint8_t>* observed =
        opts.variant == Variant::Semi ? batch.observed : nullptr;
    Z = sample_assignments_masked(ctx, q_log, observed, batch.labels, opts.temperature,
                                  opts.hard, rng);
    Tensor soft_div = state.post.assignment_divergence_col(ctx, q, q_log, elog_beta);
    if (opts.variant == Variant::Latent) {
      div_col = soft_div;
    } else {
      // Observed rows contribute -E[log beta_{z*}] instead of the soft term.
      std::vector<double> obs(static_cast<std::size_t>(B), 0.0);
      for (int i = 0; i < B; ++i)
        obs[static_cast<std::size_t>(i)] =
            (*batch.observed)[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      std::vector<double> unobs(static_cast<std::size_t>(B));
      for (int i = 0; i < B; ++i) unobs[static_cast<std::size_t>(i)] = 1.0 - obs[static_cast<std::size_t>(i)];
      Tensor m_obs = tape.constant(B, 1, std::move(obs));
      Tensor m_unobs = tape.constant(B, 1, std::move(unobs));
      Tensor onehot_div = matmul(Z, neg(elog_beta));
      div_col = add(mul(soft_div, m_unobs), mul(onehot_div, m_obs));
    }
  } else if (opts.variant == Variant::Observational) {
    Z = tape.ones(B, 1);
    div_col = matmul(Z, neg(elog_beta));
  } else {  // Unknown / Known: labels substituted as constants
    Z = onehot_rows(tape, *batch.labels, R);
    div_col = matmul(Z, neg(elog_beta));
  }

  // Conditional log-likelihood, Sum_j log g_j. With entry (i,j) marking the
  // edge x_i -> x_j, the parent mask of variable j is column j, so the
  // transposed sample serves out parent rows.
  Tensor parent_rows = transpose(A);
  Tensor R_sel;  // per-sample target gates, only needed for perfect gating
  if (opts.likelihood == LikelihoodMode::Perfect) R_sel = matmul(Z, R_m);
  Tensor u0 = row(U, 0);
  Tensor U_centered = add_rowvec(U, neg(u0));
  Tensor ll_sum;
  for (int j = 0; j < d; ++j) {
    // Effective embedding per regime: r_kj (u_k - u_0) + u_0.
    Tensor ueff = add_rowvec(mul_colvec(U_centered, col(R_m, j)), u0);
    Tensor gate;
    const Tensor* gate_ptr = nullptr;
    if (opts.likelihood == LikelihoodMode::Perfect) {
      gate = add_scalar(neg(col(R_sel, j)), 1.0);
      gate_ptr = &gate;
    }
    Tensor ll_j =
        state.densities.log_density_col(ctx, j, X, row(parent_rows, j), Z, ueff, gate_ptr);
    ll_sum = j == 0 ? ll_j : add(ll_sum, ll_j);
  }
  Tensor nll = neg(mean(ll_sum));

  // Omega(phi): per-sample assignment divergence plus the global divergences
  // scaled by 1/N so the full-data bound stays unbiased under minibatching.
  Tensor kl_global = sum(state.post.kl_embedding_rows(ctx));
  if (!targets_observed) kl_global = add(kl_global, state.post.kl_target_total(ctx));
  kl_global = add(kl_global, sum(state.post.kl_stick_rows(ctx)));
  Tensor kl = add(mean(div_col),
                  mul_scalar(kl_global, 1.0 / static_cast<double>(opts.dataset_size)));

  // Graph sparsity enters as -xi_G ||Lambda||_1 over edge probabilities. The
  // prior and the acyclicity penalty count once against the full-data
  // likelihood, so under the per-sample normalization used here they carry
  // the same 1/N factor as the global KLs; this is the full-batch objective
  // divided by N, which Adam treats identically.
  const double inv_n = 1.0 / static_cast<double>(opts.dataset_size);
  Tensor offdiag = add_scalar(neg(tape.eye(d)), 1.0);
  Tensor l1 =
      mul_scalar(sum(mul(state.graph.edge_probs(ctx), offdiag)), -opts.xi_g * inv_n);

  Tensor h = state.graph.acyclicity(ctx);
  Tensor al_lin = mul_scalar(h, al.phi * inv_n);
  Tensor al_quad = mul_scalar(square(h), 0.5 * al.mu * inv_n);

  LossResult res;
  Tensor total = add(add(add(add(nll, kl), l1), al_lin), al_quad);
  res.parts.nll = nll.scalar();
  res.parts.kl = kl.scalar();
  res.parts.l1 = l1.scalar();
  res.parts.al_lin = al_lin.scalar();
  res.parts.al_quad = al_quad.scalar();
  if (opts.variant == Variant::Semi) {
    // kappa-weighted classifier term on the observed rows.
    std::vector<double> sel(static_cast<std::size_t>(B) * R, 0.0);
    for (int i = 0; i < B; ++i) {
      if ((*batch.observed)[static_cast<std::size_t>(i)]) {
        const int z = (*batch.labels)[static_cast<std::size_t>(i)];
        if (z < 0 || z >= R)
          throw std::invalid_argument("build_loss: observed label out of range");
        sel[static_cast<std::size_t>(i) * R + z] = 1.0;
      }
    }
    Tensor obs_sel = tape.constant(B, R, std::move(sel));
    Tensor cls = mul_scalar(sum(mul(q_log, obs_sel)),
                            -opts.kappa / static_cast<double>(B));
    res.parts.classifier = cls.scalar();
    total = add(total, cls);
  }
  res.parts.total = total.scalar();
  res.total = total;
  return res;
}

}  // namespace lidcd
