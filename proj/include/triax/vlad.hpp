#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "triax/tensor.hpp"

namespace triax {

/// K centroids of length C' plus the shared assignment sharpness alpha.
/// Both are trainable after k-means initialization.
struct ClusterCodebook {
  Tensor centroids;  // K x C'
  double alpha = 1.0;

  std::size_t clusters() const { return centroids.dim(0); }
  std::size_t channels() const { return centroids.dim(1); }

  /// Throws ConfigError unless K, C' >= 1, alpha > 0 and centroids are finite.
  void validate() const;
};

/// Reverse-pass accumulator for a codebook.
struct CodebookGrad {
  Tensor centroids;
  double alpha = 0.0;
};

/// Lloyd's algorithm over the rows of `descriptors` (N x C').
///
/// Initial centroids are K distinct rows drawn with the seeded generator. A
/// cluster that ends an assignment pass empty is moved onto the descriptor
/// farthest from its current centroid. Stops when assignments are stable or
/// after max_iters passes. Throws ConfigError when fewer than K distinct
/// descriptors exist.
ClusterCodebook kmeans_init(const Tensor& descriptors, std::size_t k, std::uint64_t seed,
                            std::size_t max_iters, double alpha = 1.0);

/// exp(-alpha |x - c_k|^2) normalised over k, evaluated with max-subtraction.
std::vector<double> soft_assign(std::span<const double> x, const ClusterCodebook& codebook);

/// Soft-assignment residuals at every frame and location.
///
/// fm is T x W' x H' x C'; the result is T x W' x H' x K x C' with
/// V[t,w,h,k,j] = a_k(x) * (x[j] - c_k[j]). No aggregation over time or space.
/// When `assignments` is given it receives the T x W' x H' x K weights for the
/// reverse pass.
Tensor vlad_encode(const Tensor& fm, const ClusterCodebook& codebook,
                   Tensor* assignments = nullptr);

/// Accumulates dL/dcentroids and dL/dalpha into `grad` for the encoding above.
/// `grad_out` may be in encoded or flattened layout (only its size is checked).
/// When `grad_fm` is non-null it receives dL/dfm.
void vlad_encode_backward(const Tensor& fm, const ClusterCodebook& codebook,
                          const Tensor& assignments, const Tensor& grad_out, CodebookGrad& grad,
                          Tensor* grad_fm = nullptr);

/// Merges the (K, C') axes into F = K*C' in k-major order.
Tensor flatten_clusters(const Tensor& v);
Tensor unflatten_clusters(const Tensor& fcf, std::size_t k);

/// Action-VLAD style aggregate: sum of the residual encoding over all frames
/// and locations, K x C'. Each entry is summed in sorted order, so the result
/// is bit-identical under any permutation of frames.
Tensor vlad_aggregate(const Tensor& v);

}  // namespace triax
