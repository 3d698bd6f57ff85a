#include "triax/optim.hpp"

#include <cmath>
#include <string>

#include "triax/tensor.hpp"

namespace triax {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, std::string_view param_name) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.first_moment.size() != n || state.second_moment.size() != n)
    throw ShapeError("adam_step: parameter '" + std::string(param_name) + "' has " +
                     std::to_string(n) + " values but gradient/state sizes differ");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(grads[i]))
      throw NumericError("adam_step: non-finite gradient for parameter '" +
                         std::string(param_name) + "' at index " + std::to_string(i));

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

double lr_schedule(std::uint64_t epoch, double base_lr, std::uint64_t decay_every) {
  if (!(base_lr > 0.0)) throw ConfigError("base learning rate must be positive");
  if (decay_every == 0) throw ConfigError("lr decay period must be positive");
  return base_lr * std::pow(10.0, -static_cast<double>(epoch / decay_every));
}

}  // namespace triax
