#include "triax/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "triax/augment.hpp"
#include "triax/optim.hpp"
#include "triax/parallel.hpp"

namespace triax {

namespace {

constexpr std::size_t kChunk = 8;  // samples per gradient partial sum

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<std::span<double>> spans_of(ModelParams& p) {
  std::vector<std::span<double>> out;
  p.visit_trainable([&](std::string_view, const std::string&, std::span<double> v) { out.push_back(v); });
  return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix(splitmix(splitmix(splitmix(seed) ^ a) ^ b) ^ c);
}

double dataset_loss(const ModelConfig& config, const ModelParams& params, const Dataset& data) {
  const AugmentSpec aug{config.augment.factor, config.frames, config.grid_w, config.grid_h};
  std::vector<double> losses(data.size());
  parallel_for(data.size(), config.threads, [&](std::size_t n) {
    const Tensor fm = config.augment.enabled ? augment_center(data.features[n], aug) : data.features[n];
    losses[n] = bce_loss(forward(config, params, fm), data.label_row(n));
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(data.size());
}

TrainResult train(const ModelConfig& config, const Dataset& data,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  data.validate();
  Tensor descriptors;
  if (config.use_clustering)
    descriptors = collect_descriptors(data, config.kmeans_max_descriptors, derive_seed(config.seed, 1));
  ModelParams params = init_params(config, descriptors, data.labels, config.seed);
  return train_from(config, data, std::move(params), on_epoch);
}

TrainResult train_from(const ModelConfig& config, const Dataset& data, ModelParams params,
                       const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  data.validate();
  if (data.activities() != config.activities)
    throw ShapeError("dataset has " + std::to_string(data.activities()) + " activities, config " +
                     std::to_string(config.activities));

  const std::size_t N = data.size();
  const std::size_t batch = config.batch_size ? std::min(config.batch_size, N) : N;
  const AugmentSpec aug{config.augment.factor, config.frames, config.grid_w, config.grid_h};

  TrainResult result;
  result.initial_loss = dataset_loss(config, params, data);

  std::vector<AdamState> states;
  for (auto s : spans_of(params)) states.emplace_back(s.size());
  std::vector<std::string> names;
  params.visit_trainable([&](std::string_view, const std::string& n, std::span<double>) { names.push_back(n); });

  std::vector<std::size_t> order(N);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config.base_lr, config.lr_decay_epochs);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.seed, 2, epoch));
    for (std::size_t i = N; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);

    double epoch_loss = 0.0;
    std::size_t step = 0;
    for (std::size_t begin = 0; begin < N; begin += batch, ++step) {
      const std::size_t end = std::min(N, begin + batch);
      const std::size_t chunks = (end - begin + kChunk - 1) / kChunk;
      std::vector<ModelParams> partial(chunks);
      std::vector<double> partial_loss(chunks, 0.0);

      auto where = [&] {
        return "epoch " + std::to_string(epoch) + ", step " + std::to_string(step);
      };
      try {
        parallel_for(chunks, config.threads, [&](std::size_t c) {
          partial[c] = zeros_like(params);
          const std::size_t lo = begin + c * kChunk, hi = std::min(end, lo + kChunk);
          for (std::size_t k = lo; k < hi; ++k) {
            const std::size_t n = order[k];
            Rng rng(derive_seed(config.seed, 3, epoch, n));
            const Tensor fm = config.augment.enabled ? augment(data.features[n], aug, rng())
                                                     : data.features[n];
            partial_loss[c] +=
                loss_and_grad(config, params, fm, data.label_row(n), true, &rng, partial[c]);
          }
        });
      } catch (const NumericError& e) {
        throw NumericError(where() + ": " + e.what());
      }

      ModelParams grads = std::move(partial.front());
      double batch_loss = partial_loss.front();
      for (std::size_t c = 1; c < chunks; ++c) {
        accumulate(grads, partial[c]);
        batch_loss += partial_loss[c];
      }
      if (!std::isfinite(batch_loss))
        throw NumericError(where() + ": non-finite training loss");
      epoch_loss += batch_loss;

      const double inv = 1.0 / static_cast<double>(end - begin);
      auto p = spans_of(params);
      auto g = spans_of(grads);
      for (std::size_t i = 0; i < p.size(); ++i) {
        for (auto& v : g[i]) v *= inv;
        adam_step(p[i], g[i], states[i], lr, names[i]);
      }
      if (!params.codebook.centroids.empty() && !(params.codebook.alpha > 0.0))
        throw NumericError(where() + ": alpha left the positive range");
    }

    EpochLog entry{epoch, lr, epoch_loss / static_cast<double>(N)};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace triax
