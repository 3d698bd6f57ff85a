#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "triax/dataset.hpp"

namespace triax {

/// Generator for synthetic concurrent-activity clips.
///
/// Activity a owns a fixed signature vector (drawn from `signature_seed`,
/// scaled to RMS `amplitude[a]`), a spatial cell and a half-open temporal
/// window [start, end). A sample is all-zero plus i.i.d. N(0, noise^2), with
/// each active activity's signature added at its cell for every frame of its
/// window.
///
/// Activity sets follow `rates` (marginal P(active)) and `cooccurrence`
/// (target P(j | i)). An off-diagonal entry equal to rates[j] means i and j are
/// independent. Any other entry couples i and j; couplings must form disjoint
/// pairs with equal rates and a symmetric target q, sampled jointly with
/// P(both) = q p and P(one only) = (1 - q) p each.
struct SynthSpec {
  std::size_t samples = 200;
  std::size_t frames = 8;
  std::size_t grid_w = 4;
  std::size_t grid_h = 4;
  std::size_t channels = 8;
  std::size_t activities = 4;
  double noise = 0.1;
  std::uint64_t signature_seed = 1234;

  // Empty vectors / tensors take the defaults described in fill_defaults().
  std::vector<double> rates;
  std::vector<double> amplitude;
  Tensor cooccurrence;
  std::vector<std::pair<std::size_t, std::size_t>> cells;    // (w, h)
  std::vector<std::pair<std::size_t, std::size_t>> windows;  // [start, end)

  /// rates 0.3, amplitude 1, independent co-occurrence, cells spread across
  /// the grid in raster order, windows of length max(1, T/2) staggered over T.
  void fill_defaults();
  /// Throws ConfigError describing the first invalid field.
  void validate() const;

  Tensor signatures() const;  // A x C'
};

Dataset synth_dataset(SynthSpec spec, std::uint64_t seed);

}  // namespace triax
