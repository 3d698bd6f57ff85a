#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "triax/activity_attention.hpp"
#include "triax/config.hpp"
#include "triax/decoder.hpp"
#include "triax/encoder.hpp"
#include "triax/vlad.hpp"

namespace triax {

/// Every learned tensor of the model plus the (fixed) association masks.
/// Stages disabled by the config leave their tensors empty.
struct ModelParams {
  ClusterCodebook codebook;
  ActivityAttentionBank bank;
  EncoderParams encoder;
  DecoderParams decoder;
  AssociationMasks masks;

  /// Calls fn(group, name, values) for each non-empty trainable tensor in a
  /// fixed order. `group` is the coarse parameter family reported by
  /// gradient checks; `name` is unique.
  template <class Fn>
  void visit_trainable(Fn&& fn);

  /// Same as visit_trainable plus the association masks ("masks" group).
  template <class Fn>
  void visit_all(Fn&& fn);
};

/// Same layout as `p`, all zeros. Used as the gradient accumulator.
ModelParams zeros_like(const ModelParams& p);

/// Elementwise dst += src over all trainable tensors.
void accumulate(ModelParams& dst, const ModelParams& src, double scale = 1.0);

std::size_t trainable_count(ModelParams& p);

/// Fresh parameters: k-means codebook from `descriptors` (N x C'), uniform
/// activity masks, seeded projections and association masks from `labels`.
ModelParams init_params(const ModelConfig& config, const Tensor& descriptors, const Tensor& labels,
                        std::uint64_t seed);

/// Intermediates kept for the reverse pass.
struct ForwardCache {
  Tensor input;
  Tensor assignments;
  Tensor clustered;  // F_CF, T x W x H x F
  Tensor activity_features;  // F_M, T x A x F
  EncoderCache encoder;
  Tensor activity_vectors;  // F_A
  DecoderCache decoder;
};

/// Clustering, feature-to-activity attention, temporal encoding and
/// association-aware decoding. fm is T x W' x H' x C'; returns A logits.
/// Stage failures are rethrown with the stage name prefixed.
Tensor forward(const ModelConfig& config, const ModelParams& params, const Tensor& fm,
               bool training = false, Rng* rng = nullptr, ForwardCache* cache = nullptr);

/// Accumulates dL/dparams into `grads` given dL/dlogits.
void backward(const ModelConfig& config, const ModelParams& params, const ForwardCache& cache,
              const Tensor& grad_logits, ModelParams& grads);

/// bce_loss(forward(fm), target), accumulating its gradient into `grads`.
double loss_and_grad(const ModelConfig& config, const ModelParams& params, const Tensor& fm,
                     const Tensor& target, bool training, Rng* rng, ModelParams& grads);

/// Order-invariant baseline: vlad_aggregate followed by a linear scorer
/// (weights A x K*C', bias A).
Tensor vlad_baseline_logits(const Tensor& fm, const ClusterCodebook& codebook,
                            const Tensor& weights, const Tensor& bias);

// Params file: "TXPM", u32 entry count, then per entry u32 name length, name
// bytes and a TNSR block.
void save_params(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_params(const std::filesystem::path& path, const ModelConfig& config);

// ---------------------------------------------------------------------------

template <class Fn>
void ModelParams::visit_trainable(Fn&& fn) {
  auto visit = [&](std::string_view group, const std::string& name, Tensor& t) {
    if (!t.empty()) fn(group, name, t.data());
  };
  if (!codebook.centroids.empty()) {
    visit("centroids", "codebook.centroids", codebook.centroids);
    fn(std::string_view("alpha"), std::string("codebook.alpha"), std::span<double>(&codebook.alpha, 1));
  }
  visit("activity_masks", "bank.masks", bank.masks);
  for (std::size_t h = 0; h < encoder.heads.size(); ++h) {
    const std::string base = "encoder." + std::to_string(h);
    visit("encoder_query", base + ".query", encoder.heads[h].query);
    visit("encoder_key", base + ".key", encoder.heads[h].key);
    visit("encoder_value", base + ".value", encoder.heads[h].value);
  }
  for (auto [label, branch] : {std::pair<const char*, BranchParams*>{"positive", &decoder.positive},
                               {"negative", &decoder.negative}}) {
    const std::string base = std::string("decoder.") + label;
    visit("decoder_align", base + ".w_query", branch->w_query);
    visit("decoder_align", base + ".w_key", branch->w_key);
    visit("decoder_align", base + ".bias", branch->bias);
  }
  visit("decoder_value", "decoder.value", decoder.value);
  visit("decoder_output", "decoder.out_weight", decoder.out_weight);
  visit("decoder_output", "decoder.out_bias", decoder.out_bias);
}

template <class Fn>
void ModelParams::visit_all(Fn&& fn) {
  visit_trainable(fn);
  if (!masks.positive.empty()) {
    fn(std::string_view("masks"), std::string("masks.positive"), masks.positive.data());
    fn(std::string_view("masks"), std::string("masks.negative"), masks.negative.data());
  }
}

}  // namespace triax
