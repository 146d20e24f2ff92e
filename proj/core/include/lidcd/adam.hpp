#pragma once

#include <cstdint>
#include <vector>

namespace lidcd::ad {

// Adam with bias correction and decoupled weight decay.
struct AdamState {
  std::vector<double> m;  // first moments, same shape as the parameter
  std::vector<double> v;  // second moments
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-6;
};

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state);

}  // namespace lidcd::ad
