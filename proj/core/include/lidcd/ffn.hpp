#pragma once

#include <string>
#include <vector>

#include "lidcd/params.hpp"

namespace lidcd {

struct FfnConfig {
  int in = 0;
  int hidden = 32;
  int blocks = 2;
  int out = 0;
  double dropout = 0.1;
};

// Feed-forward stack: linear lift into the hidden width, `blocks` residual
// sub-layers (layer norm -> linear -> SiLU -> dropout -> skip connection),
// then a linear projection to the output width. Dropout draws come from the
// module's own stream so modules never perturb each other's masks.
class FfnModule {
 public:
  FfnModule() = default;
  FfnModule(ParamStore& store, const std::string& name, const FfnConfig& cfg,
            RngStream& init, int module_id);

  ad::Tensor forward(EvalCtx& ctx, const ad::Tensor& x) const;

  // First layer computed as (z_onehot @ (emb @ W_a)) + x2 @ W_b, which equals
  // forward(concat_cols(z_onehot @ emb, x2)) without materializing the
  // (batch x emb-width) product. Requires emb.cols() + x2.cols() == in.
  ad::Tensor forward_mix(EvalCtx& ctx, const ad::Tensor& z_onehot,
                         const ad::Tensor& emb, const ad::Tensor& x2) const;

  const FfnConfig& config() const { return cfg_; }
  int module_id() const { return module_id_; }
  // Parameter handles owned by this module, in registration order.
  const std::vector<int>& param_handles() const { return handles_; }

 private:
  ad::Tensor trunk(EvalCtx& ctx, ad::Tensor h) const;

  FfnConfig cfg_;
  int module_id_ = 0;
  int lift_w_ = -1, lift_b_ = -1;
  struct Block {
    int ln_gain = -1, ln_bias = -1, w = -1, b = -1;
  };
  std::vector<Block> blocks_;
  int proj_w_ = -1, proj_b_ = -1;
  std::vector<int> handles_;
};

// Layer normalization over each row with learnable gain/bias (1 x c).
ad::Tensor layer_norm(const ad::Tensor& x, const ad::Tensor& gain, const ad::Tensor& bias);

}  // namespace lidcd
