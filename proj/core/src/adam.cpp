#include "lidcd/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace lidcd::ad {

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: parameter/gradient size mismatch");
  if (state.m.empty()) state.m.assign(params.size(), 0.0);
  if (state.v.empty()) state.v.assign(params.size(), 0.0);
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw std::invalid_argument("adam_step: moment size mismatch");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= state.lr * (mhat / (std::sqrt(vhat) + state.eps) +
                             state.weight_decay * params[i]);
  }
}

}  // namespace lidcd::ad
