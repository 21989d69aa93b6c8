#include "toad/adam.hpp"

#include <cmath>

#include "toad/errors.hpp"

namespace toad::ad {

AdamState AdamState::for_params(std::span<const Tensor> params) {
  AdamState state;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.size(), 0.0);
    state.second_moment.emplace_back(p.size(), 0.0);
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state, double lr, const AdamOptions& options) {
  if (!(lr > 0.0)) throw ConfigError("adam_step: learning rate must be positive");
  if (params.size() != state.first_moment.size())
    throw ConfigError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                      " parameters, got " + std::to_string(params.size()));
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    if (m.size() != params[p].size())
      throw ConfigError("adam_step: moment buffer shape mismatch for parameter " +
                        std::to_string(p));
    if (!params[p].has_grad()) continue;
    const auto g = params[p].grad();
    auto w = params[p].mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * g[i];
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
  }
}

}  // namespace toad::ad
