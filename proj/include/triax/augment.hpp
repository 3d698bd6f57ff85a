#pragma once

#include <cstdint>

#include "triax/tensor.hpp"

namespace triax {

struct AugmentSpec {
  std::size_t factor = 3;  // temporal downsampling stride
  std::size_t window = 8;  // consecutive frames kept after downsampling
  std::size_t crop_w = 0;  // 0: full width
  std::size_t crop_h = 0;  // 0: full height
};

/// The random choices behind one augmentation.
struct AugmentDraw {
  std::size_t phase = 0;  // first kept frame, in [0, factor)
  std::size_t start = 0;  // window offset into the downsampled frames
  std::size_t crop_x = 0;
  std::size_t crop_y = 0;
};

/// Keeps frames phase, phase+factor, ..., then a `window`-long run of those,
/// then one crop shared by every frame. Throws ConfigError when fewer than
/// `window` frames survive downsampling at some phase or the crop exceeds the grid.
Tensor augment(const Tensor& fm, const AugmentSpec& spec, std::uint64_t seed,
               AugmentDraw* draw = nullptr);

/// Deterministic counterpart for evaluation: phase 0, centred window and crop.
Tensor augment_center(const Tensor& fm, const AugmentSpec& spec);

/// Applies a specific draw.
Tensor apply_augment(const Tensor& fm, const AugmentSpec& spec, const AugmentDraw& draw);

}  // namespace triax
