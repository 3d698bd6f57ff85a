#pragma once

#include <filesystem>
#include <vector>

#include "triax/tensor.hpp"

namespace triax {

/// One unconstrained W x H spatial mask per activity, stored A x W x H.
struct ActivityAttentionBank {
  Tensor masks;

  std::size_t activities() const { return masks.dim(0); }
  std::size_t width() const { return masks.dim(1); }
  std::size_t height() const { return masks.dim(2); }

  /// Every entry 1/(W*H): the initial output is the spatial mean.
  static ActivityAttentionBank uniform(std::size_t activities, std::size_t width,
                                       std::size_t height);
};

/// F_M[t,a,:] = sum_{w,h} mask_a[w,h] * fcf[t,w,h,:].
/// fcf is T x W x H x F, the result T x A x F. Frames are never mixed.
Tensor activity_attend(const Tensor& fcf, const ActivityAttentionBank& bank);

/// Accumulates dL/dmasks into `grad_masks` (A x W x H, zero-initialised when
/// empty) and, when requested, writes dL/dfcf.
void activity_attend_backward(const Tensor& fcf, const ActivityAttentionBank& bank,
                              const Tensor& grad_out, Tensor& grad_masks,
                              Tensor* grad_fcf = nullptr);

/// Ablation path with no learned masks: the spatial mean of fcf copied to
/// every activity.
Tensor spatial_mean_broadcast(const Tensor& fcf, std::size_t activities);
Tensor spatial_mean_broadcast_backward(const Tensor& fcf_shape_ref, const Tensor& grad_out);

/// Per-activity W x H grids of mask_a[w,h] * mean_t |fcf[t,w,h,:]|.
std::vector<Tensor> export_activity_maps(const ActivityAttentionBank& bank, const Tensor& fcf);

/// Writes activity_<a>.txt (space-separated rows) and, optionally,
/// activity_<a>.pgm rescaled to [0,255]. Returns the paths written.
std::vector<std::filesystem::path> write_activity_maps(const std::filesystem::path& dir,
                                                       const std::vector<Tensor>& maps,
                                                       bool with_pgm = true);

}  // namespace triax
