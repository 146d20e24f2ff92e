#include "lidcd/densities.hpp"

#include <cmath>
#include <stdexcept>

namespace lidcd {

using namespace ad;

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)
}

std::string to_string(DensityFamily f) {
  switch (f) {
    case DensityFamily::Linear: return "linear";
    case DensityFamily::Nonlinear: return "nonlinear";
    case DensityFamily::Flow: return "flow";
  }
  return "?";
}

DensityFamily density_family_from_string(const std::string& s) {
  if (s == "linear") return DensityFamily::Linear;
  if (s == "nonlinear") return DensityFamily::Nonlinear;
  if (s == "flow" || s == "nongaussian") return DensityFamily::Flow;
  throw std::invalid_argument("unknown density family: " + s);
}

Tensor gaussian_log_density(const Tensor& x, const Tensor& mean, const Tensor& sigma) {
  Tensor z = div(sub(x, mean), sigma);
  return sub(neg(add(log(sigma), mul_scalar(square(z), 0.5))),
             x.tape()->full(x.rows(), x.cols(), kHalfLog2Pi));
}

int DensityModel::output_width() const {
  switch (cfg_.family) {
    case DensityFamily::Linear: return cfg_.d + 2;
    case DensityFamily::Nonlinear: return 2;
    case DensityFamily::Flow: return 3 * cfg_.flow_hidden * cfg_.flow_layers + 2;
  }
  return 0;
}

DensityModel::DensityModel(ParamStore& store, const DensityConfig& cfg, RngStream& init)
    : cfg_(cfg) {
  if (cfg.d <= 0) throw std::invalid_argument("DensityModel: d must be positive");
  FfnConfig fc;
  fc.hidden = cfg.hidden;
  fc.blocks = cfg.blocks;
  fc.dropout = cfg.dropout;
  fc.in = cfg.family == DensityFamily::Linear ? cfg.h : cfg.h + cfg.d;
  fc.out = output_width();
  nets_.reserve(static_cast<std::size_t>(cfg.d));
  for (int j = 0; j < cfg.d; ++j) {
    RngStream sub = init.substream(static_cast<std::uint64_t>(j));
    nets_.emplace_back(store, "density" + std::to_string(j), fc, sub, /*module_id=*/1 + j);
  }
}

Tensor DensityModel::log_density_col(EvalCtx& ctx, int j, const Tensor& X,
                                     const Tensor& a_row, const Tensor& z_onehot,
                                     const Tensor& emb_regimes,
                                     const Tensor* perfect_gate) const {
  if (j < 0 || j >= cfg_.d) throw std::invalid_argument("log_density_col: bad variable");
  const FfnModule& net = nets_[static_cast<std::size_t>(j)];
  Tensor x_col = col(X, j);
  Tensor xm = mul_rowvec(X, a_row);  // A_j (.) x, zero diagonal kills x_j itself
  if (perfect_gate != nullptr) xm = mul_colvec(xm, *perfect_gate);

  switch (cfg_.family) {
    case DensityFamily::Linear: {
      // Coefficients depend on the embedding only; one network evaluation per
      // regime, then per-sample selection.
      Tensor coefs = net.forward(ctx, emb_regimes);     // R x (d+2)
      Tensor c = matmul(z_onehot, coefs);               // B x (d+2)
      Tensor a = slice_cols(c, 0, cfg_.d);
      Tensor b = slice_cols(c, cfg_.d, cfg_.d + 1);
      Tensor sraw = slice_cols(c, cfg_.d + 1, cfg_.d + 2);
      Tensor mean = add(sum_rows(mul(a, xm)), b);
      Tensor sigma = add_scalar(softplus(sraw), cfg_.sigma_floor);
      return gaussian_log_density(x_col, mean, sigma);
    }
    case DensityFamily::Nonlinear: {
      Tensor out = net.forward_mix(ctx, z_onehot, emb_regimes, xm);  // B x 2
      Tensor mean = slice_cols(out, 0, 1);
      Tensor sigma = add_scalar(softplus(slice_cols(out, 1, 2)), cfg_.sigma_floor);
      return gaussian_log_density(x_col, mean, sigma);
    }
    case DensityFamily::Flow: {
      Tensor raw = net.forward_mix(ctx, z_onehot, emb_regimes, xm);
      return dsf_log_density_from_raw(x_col, raw, cfg_.flow_layers, cfg_.flow_hidden,
                                      cfg_.sigma_floor);
    }
  }
  throw std::logic_error("log_density_col: unreachable");
}

namespace {

struct DsfStep {
  Tensor y;       // transformed value
  Tensor logdet;  // log derivative contribution
};

DsfStep dsf_layer(const Tensor& y, const Tensor& w_raw, const Tensor& a_raw,
                  const Tensor& b_raw) {
  Tensor w = softmax_rows(w_raw);
  Tensor a = add_scalar(softplus(a_raw), 1e-6);
  Tensor t = add(mul_colvec(a, y), b_raw);
  // Clamps keep the pre-image strictly inside (0, 1) so the logit and the
  // log-derivative stay finite even for saturated inputs.
  Tensor s = clamp(sigmoid(t), 1e-12, 1.0 - 1e-12);
  Tensor sw = clamp(sum_rows(mul(w, s)), 1e-6, 1.0 - 1e-6);
  Tensor one_minus_sw = add_scalar(neg(sw), 1.0);
  Tensor deriv = sum_rows(mul(mul(w, a), mul(s, add_scalar(neg(s), 1.0))));
  DsfStep out;
  out.y = sub(log(sw), log(one_minus_sw));
  out.logdet = sub(log(deriv), add(log(sw), log(one_minus_sw)));
  return out;
}

}  // namespace

Tensor dsf_transform_from_raw(const Tensor& x_col, const Tensor& raw, int layers, int F) {
  if (raw.cols() < 3 * F * layers)
    throw ad::ShapeError("dsf_transform_from_raw: raw parameter block too small");
  Tensor y = x_col;
  for (int l = 0; l < layers; ++l) {
    const int off = 3 * F * l;
    DsfStep step = dsf_layer(y, slice_cols(raw, off, off + F),
                             slice_cols(raw, off + F, off + 2 * F),
                             slice_cols(raw, off + 2 * F, off + 3 * F));
    y = step.y;
  }
  return y;
}

Tensor dsf_log_density_from_raw(const Tensor& x_col, const Tensor& raw, int layers,
                                int F, double sigma_floor) {
  const int expect = 3 * F * layers + 2;
  if (raw.cols() != expect)
    throw ad::ShapeError("dsf_log_density_from_raw: expected " + std::to_string(expect) +
                         " raw parameters per row");
  Tensor y = x_col;
  Tensor logdet = x_col.tape()->zeros(x_col.rows(), 1);
  for (int l = 0; l < layers; ++l) {
    const int off = 3 * F * l;
    DsfStep step = dsf_layer(y, slice_cols(raw, off, off + F),
                             slice_cols(raw, off + F, off + 2 * F),
                             slice_cols(raw, off + 2 * F, off + 3 * F));
    y = step.y;
    logdet = add(logdet, step.logdet);
  }
  const int off = 3 * F * layers;
  Tensor mean = slice_cols(raw, off, off + 1);
  Tensor sigma = add_scalar(softplus(slice_cols(raw, off + 1, off + 2)), sigma_floor);
  return add(logdet, gaussian_log_density(y, mean, sigma));
}

}  // namespace lidcd
