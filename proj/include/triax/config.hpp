#pragma once

#include <cstdint>

#include "triax/decoder.hpp"
#include "triax/encoder.hpp"

namespace triax {

/// Training-time augmentation. When enabled, dataset maps are larger than the
/// model input: each epoch draws a phase-shifted temporal downsample, a
/// `frames`-long window and a grid_w x grid_h crop.
struct AugmentConfig {
  bool enabled = false;
  std::size_t factor = 3;
};

/// Model dimensions, ablation switches and training recipe.
struct ModelConfig {
  std::size_t frames = 8;    // T
  std::size_t grid_w = 4;    // W'
  std::size_t grid_h = 4;    // H'
  std::size_t channels = 8;  // C'
  std::size_t clusters = 4;  // K
  std::size_t activities = 4;
  std::size_t proj_dim = 0;  // d; 0 means d = F

  bool use_clustering = true;
  bool use_activity_attention = true;
  bool per_activity_projections = true;
  bool temporal_masks = true;
  bool association_masks = true;
  bool multi_dim_decoder = true;
  BranchFusion fusion = BranchFusion::average;

  double dropout = 0.5;
  double threshold = 0.5;
  double base_lr = 1e-4;
  std::size_t lr_decay_epochs = 100;
  std::size_t epochs = 300;
  std::size_t batch_size = 0;  // 0: full batch
  std::uint64_t seed = 0;
  double alpha_init = 1.0;
  std::size_t kmeans_iters = 50;
  std::size_t kmeans_max_descriptors = 4096;
  std::size_t threads = 1;
  AugmentConfig augment;

  /// F: K*C' with clustering, C' without.
  std::size_t feature_dim() const { return use_clustering ? clusters * channels : channels; }
  std::size_t projection_dim() const { return proj_dim ? proj_dim : feature_dim(); }
  /// F_out, the width of F_A and of every decoder tensor.
  std::size_t decoder_dim() const { return encoder_options().output_dim(projection_dim()); }

  EncoderOptions encoder_options() const { return {temporal_masks, fusion}; }
  DecoderOptions decoder_options(bool training) const {
    DecoderOptions o;
    o.association_masks = association_masks;
    o.multi_dim = multi_dim_decoder;
    o.dropout_rate = dropout;
    o.training = training;
    return o;
  }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

}  // namespace triax
