#include "lidcd/ffn.hpp"

#include <cmath>
#include <stdexcept>

namespace lidcd {

using namespace ad;

namespace {

std::vector<double> init_weights(int rows, int cols, RngStream& rng) {
  const double std = std::sqrt(1.0 / rows);  // rows == fan-in for (in x out)
  std::vector<double> w(static_cast<std::size_t>(rows) * cols);
  for (double& v : w) v = rng.normal(0.0, std);
  return w;
}

}  // namespace

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  const int c = x.cols();
  Tensor m = mul_scalar(sum_rows(x), 1.0 / c);
  Tensor centered = add_colvec(x, neg(m));
  Tensor var = mul_scalar(sum_rows(square(centered)), 1.0 / c);
  Tensor inv = recip(sqrt(add_scalar(var, 1e-5)));
  Tensor normed = mul_colvec(centered, inv);
  return add_rowvec(mul_rowvec(normed, gain), bias);
}

FfnModule::FfnModule(ParamStore& store, const std::string& name, const FfnConfig& cfg,
                     RngStream& init, int module_id)
    : cfg_(cfg), module_id_(module_id) {
  if (cfg.in <= 0 || cfg.out <= 0 || cfg.hidden <= 0)
    throw std::invalid_argument("FfnModule: dimensions must be positive");
  auto reg = [&](const std::string& suffix, int r, int c, std::vector<double> v) {
    const int h = store.add(name + "." + suffix, r, c, std::move(v));
    handles_.push_back(h);
    return h;
  };
  lift_w_ = reg("lift.w", cfg.in, cfg.hidden, init_weights(cfg.in, cfg.hidden, init));
  lift_b_ = reg("lift.b", 1, cfg.hidden, std::vector<double>(static_cast<std::size_t>(cfg.hidden), 0.0));
  for (int b = 0; b < cfg.blocks; ++b) {
    Block blk;
    const std::string base = "block" + std::to_string(b);
    blk.ln_gain = reg(base + ".ln.gain", 1, cfg.hidden, std::vector<double>(static_cast<std::size_t>(cfg.hidden), 1.0));
    blk.ln_bias = reg(base + ".ln.bias", 1, cfg.hidden, std::vector<double>(static_cast<std::size_t>(cfg.hidden), 0.0));
    blk.w = reg(base + ".w", cfg.hidden, cfg.hidden, init_weights(cfg.hidden, cfg.hidden, init));
    blk.b = reg(base + ".b", 1, cfg.hidden, std::vector<double>(static_cast<std::size_t>(cfg.hidden), 0.0));
    blocks_.push_back(blk);
  }
  // Zero projection: the stack starts as the constant zero map, so density
  // heads begin at neutral parameters instead of random ones.
  proj_w_ = reg("proj.w", cfg.hidden, cfg.out,
                std::vector<double>(static_cast<std::size_t>(cfg.hidden) * cfg.out, 0.0));
  proj_b_ = reg("proj.b", 1, cfg.out, std::vector<double>(static_cast<std::size_t>(cfg.out), 0.0));
}

Tensor FfnModule::trunk(EvalCtx& ctx, Tensor h) const {
  const bool drop = ctx.training() && cfg_.dropout > 0.0;
  for (const Block& blk : blocks_) {
    Tensor t = layer_norm(h, ctx.param(blk.ln_gain), ctx.param(blk.ln_bias));
    t = affine(t, ctx.param(blk.w), ctx.param(blk.b));
    t = silu(t);
    if (drop) {
      RngStream& rng = ctx.dropout_stream(module_id_);
      const double keep = 1.0 - cfg_.dropout;
      std::vector<double> mask(static_cast<std::size_t>(t.size()));
      for (double& m : mask) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
      t = mul(t, ctx.tape().constant(t.rows(), t.cols(), std::move(mask)));
    }
    h = add(h, t);
  }
  return affine(h, ctx.param(proj_w_), ctx.param(proj_b_));
}

Tensor FfnModule::forward(EvalCtx& ctx, const Tensor& x) const {
  if (x.cols() != cfg_.in)
    throw ad::ShapeError("FfnModule::forward: input width mismatch");
  Tensor h = affine(x, ctx.param(lift_w_), ctx.param(lift_b_));
  return trunk(ctx, h);
}

Tensor FfnModule::forward_mix(EvalCtx& ctx, const Tensor& z_onehot, const Tensor& emb,
                              const Tensor& x2) const {
  const int ca = emb.cols(), cb = x2.cols();
  if (ca + cb != cfg_.in)
    throw ad::ShapeError("FfnModule::forward_mix: split widths do not sum to input width");
  if (z_onehot.cols() != emb.rows())
    throw ad::ShapeError("FfnModule::forward_mix: selector/embedding mismatch");
  const Tensor& w = ctx.param(lift_w_);
  Tensor wa = slice_rows(w, 0, ca);
  Tensor wb = slice_rows(w, ca, ca + cb);
  Tensor h = add_rowvec(add(matmul(z_onehot, matmul(emb, wa)), matmul(x2, wb)),
                        ctx.param(lift_b_));
  return trunk(ctx, h);
}

}  // namespace lidcd
