#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace triax {

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(std::size_t n = 0) : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

/// One bias-corrected Adam update of params in place. A non-finite gradient
/// raises NumericError naming `param_name` before anything is modified.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, std::string_view param_name = "param");

/// Step decay: base_lr / 10 for every completed `decay_every` epochs.
double lr_schedule(std::uint64_t epoch, double base_lr, std::uint64_t decay_every = 100);

}  // namespace triax
