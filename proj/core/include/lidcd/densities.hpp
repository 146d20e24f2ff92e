#pragma once

#include <string>
#include <vector>

#include "lidcd/ffn.hpp"

namespace lidcd {

enum class DensityFamily { Linear, Nonlinear, Flow };

std::string to_string(DensityFamily f);
DensityFamily density_family_from_string(const std::string& s);

struct DensityConfig {
  DensityFamily family = DensityFamily::Linear;
  int d = 0;         // number of variables
  int h = 264;       // intervention-embedding width
  int hidden = 32;   // FFN hidden width
  int blocks = 2;    // FFN residual blocks
  double dropout = 0.1;
  int flow_layers = 2;   // DSF transforms
  int flow_hidden = 12;  // DSF mixture size F
  double sigma_floor = 1e-3;
};

// The d conditional densities g_j(x_j | A_j (.) x, u; theta_j). One network
// per variable; its parameters are shared by every intervention regime, only
// the conditioning embedding changes.
class DensityModel {
 public:
  DensityModel() = default;
  DensityModel(ParamStore& store, const DensityConfig& cfg, RngStream& init);

  // Batched log g_j for every sample: returns B x 1.
  //   X            B x d data (constant)
  //   a_row        1 x d sampled adjacency row for variable j (diagonal 0)
  //   z_onehot     B x R regime selector rows
  //   emb_regimes  R x h per-regime effective embeddings for variable j
  //   perfect_gate optional B x 1 factor that zeroes the parent vector of
  //                intervened samples (the perfect-intervention likelihood)
  ad::Tensor log_density_col(EvalCtx& ctx, int j, const ad::Tensor& X,
                             const ad::Tensor& a_row, const ad::Tensor& z_onehot,
                             const ad::Tensor& emb_regimes,
                             const ad::Tensor* perfect_gate) const;

  const DensityConfig& config() const { return cfg_; }
  const FfnModule& net(int j) const { return nets_[static_cast<std::size_t>(j)]; }
  int output_width() const;

 private:
  DensityConfig cfg_;
  std::vector<FfnModule> nets_;
};

// log N(x; mean, sigma^2) elementwise; all three tensors share a shape.
ad::Tensor gaussian_log_density(const ad::Tensor& x, const ad::Tensor& mean,
                                const ad::Tensor& sigma);

// Deep sigmoidal flow density evaluated from raw (unconstrained) parameters.
// Layout per layer: [w_raw(F), a_raw(F), b_raw(F)], then [mu, sigma_raw].
// Exposed separately so the transform can be exercised with hand-built
// parameters.
ad::Tensor dsf_log_density_from_raw(const ad::Tensor& x_col, const ad::Tensor& raw,
                                    int layers, int F, double sigma_floor);

// The monotone transform alone: returns tau(x) (B x 1).
ad::Tensor dsf_transform_from_raw(const ad::Tensor& x_col, const ad::Tensor& raw,
                                  int layers, int F);

}  // namespace lidcd
