#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "triax/gradcheck.hpp"
#include "triax/ops.hpp"

namespace testsupport {

inline triax::Tensor random_tensor(triax::Shape shape, triax::Rng& rng, double lo = -1.0,
                                   double hi = 1.0) {
  triax::Tensor t(std::move(shape));
  triax::fill_uniform(t, lo, hi, rng);
  return t;
}

// Max relative error between an analytic gradient and central differences of f at x.
inline double grad_error(const std::function<double(const triax::Tensor&)>& f, const triax::Tensor& x,
                         const triax::Tensor& analytic) {
  const triax::Tensor numeric = triax::finite_diff_grad(f, x);
  return triax::max_relative_error(analytic.values(), numeric.values());
}

// Weighted sum of every element; the weights make a generic upstream gradient.
inline double weighted_sum(const triax::Tensor& y, const triax::Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("triax_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
