#include "triax/augment.hpp"

#include <string>

#include "triax/ops.hpp"

namespace triax {

namespace {

struct Extents {
  std::size_t crop_w, crop_h;
};

Extents check(const Tensor& fm, const AugmentSpec& spec) {
  if (fm.rank() != 4) throw ShapeError("augment expects T x W' x H' x C', got " + shape_str(fm.shape()));
  if (spec.factor == 0 || spec.window == 0) throw ConfigError("augment: factor and window must be >= 1");
  const std::size_t T = fm.dim(0);
  // the smallest phase-dependent frame count is floor(T / factor)
  if (T / spec.factor < spec.window)
    throw ConfigError("augment: window of " + std::to_string(spec.window) +
                      " frames is longer than the " + std::to_string(T / spec.factor) +
                      " frames available after downsampling " + std::to_string(T) + " by " +
                      std::to_string(spec.factor));
  const std::size_t cw = spec.crop_w ? spec.crop_w : fm.dim(1);
  const std::size_t ch = spec.crop_h ? spec.crop_h : fm.dim(2);
  if (cw > fm.dim(1) || ch > fm.dim(2))
    throw ConfigError("augment: crop " + std::to_string(cw) + "x" + std::to_string(ch) +
                      " exceeds grid " + std::to_string(fm.dim(1)) + "x" + std::to_string(fm.dim(2)));
  return {cw, ch};
}

std::size_t kept_frames(std::size_t T, std::size_t factor, std::size_t phase) {
  return (T - phase + factor - 1) / factor;
}

}  // namespace

Tensor apply_augment(const Tensor& fm, const AugmentSpec& spec, const AugmentDraw& draw) {
  const auto [cw, ch] = check(fm, spec);
  const std::size_t T = fm.dim(0), W = fm.dim(1), H = fm.dim(2), C = fm.dim(3);
  if (draw.phase >= spec.factor || draw.start + spec.window > kept_frames(T, spec.factor, draw.phase) ||
      draw.crop_x + cw > W || draw.crop_y + ch > H)
    throw ConfigError("augment: draw is out of range");
  Tensor out({spec.window, cw, ch, C});
  for (std::size_t t = 0; t < spec.window; ++t) {
    const std::size_t src_t = draw.phase + (draw.start + t) * spec.factor;
    for (std::size_t w = 0; w < cw; ++w)
      for (std::size_t h = 0; h < ch; ++h)
        for (std::size_t c = 0; c < C; ++c)
          out.at(t, w, h, c) = fm.at(src_t, draw.crop_x + w, draw.crop_y + h, c);
  }
  return out;
}

Tensor augment(const Tensor& fm, const AugmentSpec& spec, std::uint64_t seed, AugmentDraw* draw) {
  const auto [cw, ch] = check(fm, spec);
  Rng rng(seed);
  AugmentDraw d;
  d.phase = rng() % spec.factor;
  d.start = rng() % (kept_frames(fm.dim(0), spec.factor, d.phase) - spec.window + 1);
  d.crop_x = rng() % (fm.dim(1) - cw + 1);
  d.crop_y = rng() % (fm.dim(2) - ch + 1);
  if (draw) *draw = d;
  return apply_augment(fm, spec, d);
}

Tensor augment_center(const Tensor& fm, const AugmentSpec& spec) {
  const auto [cw, ch] = check(fm, spec);
  AugmentDraw d;
  d.start = (kept_frames(fm.dim(0), spec.factor, 0) - spec.window) / 2;
  d.crop_x = (fm.dim(1) - cw) / 2;
  d.crop_y = (fm.dim(2) - ch) / 2;
  return apply_augment(fm, spec, d);
}

}  // namespace triax
