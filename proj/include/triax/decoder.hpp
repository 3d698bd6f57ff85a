#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "triax/ops.hpp"
#include "triax/tensor.hpp"

namespace triax {

/// Statistical co-occurrence masks over activities, both A x A.
/// positive[i][j] = P(j active | i active); negative = 1 - positive.
struct AssociationMasks {
  Tensor positive;
  Tensor negative;

  std::size_t activities() const { return positive.dim(0); }
};

/// Counts co-occurrences in an N x A matrix of 0/1 labels. Rows of activities
/// that never occur are all zero in `positive` (all one in `negative`).
/// Throws ConfigError on any entry other than 0 or 1.
AssociationMasks build_assoc_masks(const Tensor& labels);

/// Mask CSVs: rows are the given activity i, columns activity j, 17
/// significant digits so values round-trip exactly.
void write_mask_csv(const std::filesystem::path& path, const Tensor& mask);
Tensor read_mask_csv(const std::filesystem::path& path);

/// Alignment parameters for one decoder branch, all over the F_out axis.
struct BranchParams {
  Tensor w_query;  // D x D, applied to the attending activity
  Tensor w_key;    // D x D, applied to the attended activity
  Tensor bias;     // D
};

struct DecoderParams {
  BranchParams positive;
  BranchParams negative;
  Tensor value;       // D x D, shared by both branches
  Tensor out_weight;  // A x D, one scorer per activity
  Tensor out_bias;    // A

  static DecoderParams random(std::size_t activities, std::size_t dim, Rng& rng);
};

struct DecoderOptions {
  bool association_masks = true;  // false: forward/backward masks over activity index
  bool multi_dim = true;          // false: one scalar alignment per activity pair
  double dropout_rate = 0.5;
  bool training = false;
  double mask_epsilon = 1e-6;  // scores receive log(M + epsilon)
  double score_clip = 5.0;     // multi-dim scores are clip * tanh(z / clip)
};

/// Per-branch attention weights, indexed [i][j][e]: attending activity i,
/// attended activity j, feature e. Sums over j are 1 for every (i, e).
struct DecoderAttention {
  Tensor positive;
  Tensor negative;
};

struct DecoderCache {
  Tensor input;  // F_A
  Tensor values;
  struct Branch {
    Tensor query, key;  // projected F_A, A x D
    Tensor attention;   // A x A x D
    Tensor squashed;    // tanh(z / clip), multi-dim mode only
  };
  Branch positive, negative;
  Tensor fused;          // O before dropout
  Tensor dropout_scale;  // A x D
  Tensor dropped;        // O after dropout
};

/// Association-aware attention across activities followed by one linear
/// scorer per activity. Returns A logits. `rng` is only used in training mode.
Tensor decode(const Tensor& fa, const AssociationMasks& masks, const DecoderParams& params,
              const DecoderOptions& options, Rng* rng = nullptr, DecoderCache* cache = nullptr);

/// Accumulates parameter gradients into `grads` and returns dL/dF_A.
Tensor decode_backward(const DecoderParams& params, const DecoderOptions& options,
                       const DecoderCache& cache, const Tensor& grad_logits,
                       DecoderParams& grads);

DecoderAttention decoder_attention(const Tensor& fa, const AssociationMasks& masks,
                                   const DecoderParams& params, const DecoderOptions& options);

/// The {0,1} branch masks actually applied: the association masks, or
/// forward (j <= i) and backward (j >= i) masks when association masks are off.
AssociationMasks effective_branch_masks(const AssociationMasks& masks,
                                        const DecoderOptions& options);

/// Mean binary cross-entropy over activities, in the stable logit form.
double bce_loss(const Tensor& logits, const Tensor& targets);
Tensor bce_loss_grad(const Tensor& logits, const Tensor& targets);

double sigmoid(double z);

/// 1 where sigmoid(logit) >= threshold. At the default 0.5 a zero logit is positive.
std::vector<std::uint8_t> predict(const Tensor& logits, double threshold = 0.5);

}  // namespace triax
