#pragma once

#include "json.hpp"

#include "triax/dataset.hpp"
#include "triax/model.hpp"

namespace triax {

struct Metrics {
  double per_label_accuracy = 0.0;
  double precision_micro = 0.0;
  double recall_micro = 0.0;
  double f1_micro = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;
  double map = 0.0;
  std::size_t excluded_classes = 0;  // classes with no positives, left out of macro and mAP
};

/// Multi-label metrics from N x A scores (probabilities) and 0/1 labels.
/// A score >= threshold is a positive prediction. Any 0/0 ratio is 0.
/// AP ranks samples by descending score (ties by index) and averages the
/// precision at each positive.
Metrics compute_metrics(const Tensor& scores, const Tensor& labels, double threshold);

/// Sigmoid scores for every sample, N x A. Samples are spread over
/// config.threads workers; the output does not depend on the thread count.
/// When config.augment is enabled the centred evaluation crop is applied first.
Tensor predict_scores(const ModelConfig& config, const ModelParams& params, const Dataset& data);

Metrics evaluate(const ModelConfig& config, const ModelParams& params, const Dataset& data,
                 double threshold);

nlohmann::ordered_json to_json(const Metrics& m);

}  // namespace triax
