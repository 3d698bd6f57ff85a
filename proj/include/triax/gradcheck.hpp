#pragma once

#include <functional>
#include <span>

#include "triax/tensor.hpp"

namespace triax {

/// Central-difference gradient of a scalar function: (f(x+h e_i) - f(x-h e_i)) / 2h.
/// Throws NumericError with the element index when f is non-finite at a probe.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h = 1e-5);

/// Denominator floor used by max_relative_error.
inline constexpr double kRelErrorFloor = 1e-6;

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor).
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double floor = kRelErrorFloor);

}  // namespace triax
