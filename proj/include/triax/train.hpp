#pragma once

#include <functional>
#include <vector>

#include "triax/dataset.hpp"
#include "triax/model.hpp"

namespace triax {

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;  // mean training loss over the epoch, dropout active
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
  double initial_loss = 0.0;  // mean loss of the initial parameters, dropout off
};

/// Mean bce loss over the dataset in inference mode.
double dataset_loss(const ModelConfig& config, const ModelParams& params, const Dataset& data);

/// Initializes from the training data (k-means codebook, association masks
/// from its labels) and minimizes mean bce loss with Adam under the step-decay
/// schedule. Mini-batches of config.batch_size (whole dataset when 0) are
/// drawn from a seeded shuffle each epoch. Per-sample gradients are reduced in
/// a fixed order, so results are bit-identical for any thread count.
/// Throws NumericError naming the epoch and step on a non-finite loss.
TrainResult train(const ModelConfig& config, const Dataset& data,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Same loop starting from the given parameters.
TrainResult train_from(const ModelConfig& config, const Dataset& data, ModelParams params,
                       const std::function<void(const EpochLog&)>& on_epoch = {});

/// splitmix64-style hash of a seed and up to three stream indices.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace triax
