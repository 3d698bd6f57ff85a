#include "triax/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "triax/augment.hpp"
#include "triax/parallel.hpp"

namespace triax {

namespace {
double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }
double f1(double p, double r) { return ratio(2.0 * p * r, p + r); }
}  // namespace

Metrics compute_metrics(const Tensor& scores, const Tensor& labels, double threshold) {
  if (scores.shape() != labels.shape() || scores.rank() != 2)
    throw ShapeError("compute_metrics: scores " + shape_str(scores.shape()) + " vs labels " +
                     shape_str(labels.shape()));
  const std::size_t N = scores.dim(0), A = scores.dim(1);

  double tp = 0, fp = 0, fn = 0, correct = 0;
  double p_sum = 0, r_sum = 0, f_sum = 0, ap_sum = 0;
  std::size_t included = 0;
  Metrics m;
  std::vector<std::size_t> order(N);
  for (std::size_t a = 0; a < A; ++a) {
    double ctp = 0, cfp = 0, cfn = 0, positives = 0;
    for (std::size_t n = 0; n < N; ++n) {
      const bool pred = scores[n * A + a] >= threshold;
      const bool truth = labels[n * A + a] != 0.0;
      positives += truth;
      ctp += pred && truth;
      cfp += pred && !truth;
      cfn += !pred && truth;
      correct += pred == truth;
    }
    tp += ctp;
    fp += cfp;
    fn += cfn;
    if (positives == 0) {
      ++m.excluded_classes;
      continue;
    }
    ++included;
    const double p = ratio(ctp, ctp + cfp), r = ratio(ctp, ctp + cfn);
    p_sum += p;
    r_sum += r;
    f_sum += f1(p, r);

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return scores[x * A + a] > scores[y * A + a];
    });
    double hits = 0, ap = 0;
    for (std::size_t k = 0; k < N; ++k) {
      if (labels[order[k] * A + a] == 0.0) continue;
      hits += 1;
      ap += hits / static_cast<double>(k + 1);
    }
    ap_sum += ap / positives;
  }

  m.per_label_accuracy = ratio(correct, static_cast<double>(N * A));
  m.precision_micro = ratio(tp, tp + fp);
  m.recall_micro = ratio(tp, tp + fn);
  m.f1_micro = f1(m.precision_micro, m.recall_micro);
  const double k = static_cast<double>(included);
  m.precision_macro = ratio(p_sum, k);
  m.recall_macro = ratio(r_sum, k);
  m.f1_macro = ratio(f_sum, k);
  m.map = ratio(ap_sum, k);
  return m;
}

Tensor predict_scores(const ModelConfig& config, const ModelParams& params, const Dataset& data) {
  data.validate();
  const std::size_t N = data.size(), A = config.activities;
  const AugmentSpec aug{config.augment.factor, config.frames, config.grid_w, config.grid_h};
  Tensor scores({N, A});
  parallel_for(N, config.threads, [&](std::size_t n) {
    const Tensor logits =
        config.augment.enabled ? forward(config, params, augment_center(data.features[n], aug))
                               : forward(config, params, data.features[n]);
    for (std::size_t a = 0; a < A; ++a) scores[n * A + a] = sigmoid(logits[a]);
  });
  return scores;
}

Metrics evaluate(const ModelConfig& config, const ModelParams& params, const Dataset& data,
                 double threshold) {
  return compute_metrics(predict_scores(config, params, data), data.labels, threshold);
}

nlohmann::ordered_json to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["per_label_accuracy"] = m.per_label_accuracy;
  j["precision_micro"] = m.precision_micro;
  j["recall_micro"] = m.recall_micro;
  j["f1_micro"] = m.f1_micro;
  j["precision_macro"] = m.precision_macro;
  j["recall_macro"] = m.recall_macro;
  j["f1_macro"] = m.f1_macro;
  j["map"] = m.map;
  j["excluded_classes"] = m.excluded_classes;
  return j;
}

}  // namespace triax
