#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "triax/ops.hpp"
#include "triax/tensor.hpp"

namespace triax {

enum class MaskDirection { forward, backward, none };
enum class BranchFusion { average, concat };

std::string_view to_string(MaskDirection d);

/// T x T additive mask. forward allows t' <= t, backward t' >= t, none
/// allows everything. The diagonal is always allowed so no row is empty.
Tensor temporal_mask(std::size_t frames, MaskDirection direction);

/// Query/key/value projections for one activity, each F x d.
struct ProjectionTriple {
  Tensor query;
  Tensor key;
  Tensor value;
};

struct EncoderParams {
  std::vector<ProjectionTriple> heads;  // A heads, or 1 when shared
  bool shared = false;

  const ProjectionTriple& head(std::size_t activity) const {
    return heads.at(shared ? 0 : activity);
  }
  ProjectionTriple& head(std::size_t activity) { return heads.at(shared ? 0 : activity); }

  /// Seeded uniform init in [-1/sqrt(F), 1/sqrt(F)].
  static EncoderParams random(std::size_t activities, std::size_t features, std::size_t proj_dim,
                              bool shared, Rng& rng);
};

struct EncoderOptions {
  bool temporal_masks = true;  // false: a single unmasked branch
  BranchFusion fusion = BranchFusion::average;

  std::vector<MaskDirection> directions() const;
  std::size_t output_dim(std::size_t proj_dim) const;
};

struct AttendResult {
  Tensor output;     // T x d
  Tensor attention;  // T x T, rows sum to 1
};

/// softmax((seq Wq)(seq Wk)^T / sqrt(d) + mask) (seq Wv) for one activity.
AttendResult scaled_dot_attend(const Tensor& seq, const ProjectionTriple& proj,
                               MaskDirection direction);

struct EncoderOutput {
  Tensor per_frame;  // F_TA: T x A x F_out
  Tensor activity;   // F_A:  A x F_out, the sum of per_frame over time
};

/// Saved intermediates for encode_backward.
struct EncoderCache {
  struct Head {
    Tensor input, query, key, value;
    std::vector<Tensor> attention;  // one per direction
  };
  std::vector<Head> heads;
};

/// Runs every activity independently: per-direction attention over time,
/// fused by averaging or concatenation, then summed over frames.
EncoderOutput encode(const Tensor& fm, const EncoderParams& params, const EncoderOptions& options,
                     EncoderCache* cache = nullptr);

/// Accumulates projection gradients into `grads` and returns dL/dfm given
/// dL/dF_A. `grads` must have the same layout as `params`.
Tensor encode_backward(const EncoderParams& params, const EncoderOptions& options,
                       const EncoderCache& cache, const Tensor& grad_activity,
                       EncoderParams& grads);

struct TemporalAttentionGrid {
  std::size_t activity = 0;
  MaskDirection direction = MaskDirection::none;
  Tensor attention;  // rows: query frame, columns: key frame
};

std::vector<TemporalAttentionGrid> export_temporal_attention(const Tensor& fm,
                                                             const EncoderParams& params,
                                                             const EncoderOptions& options);

/// One CSV per grid, named temporal_a<activity>_<direction>.csv.
std::vector<std::filesystem::path> write_temporal_attention(
    const std::filesystem::path& dir, const std::vector<TemporalAttentionGrid>& grids);

}  // namespace triax
