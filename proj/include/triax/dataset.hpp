#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "triax/tensor.hpp"

namespace triax {

/// Feature maps (each T x W' x H' x C') with an N x A matrix of 0/1 labels.
struct Dataset {
  std::vector<Tensor> features;
  Tensor labels;

  std::size_t size() const { return features.size(); }
  std::size_t activities() const { return labels.dim(1); }

  /// Checks uniform shapes, binary labels and matching counts.
  void validate() const;
  Tensor label_row(std::size_t i) const;
};

/// Directory layout: sample_<i>.tnsr (zero-padded to 6 digits) per sample and
/// labels.csv with N rows of A comma-separated 0/1 values.
void save_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& dir);

/// Up to `max_rows` descriptor rows (C' each) drawn uniformly without
/// replacement from every frame and location of every sample.
Tensor collect_descriptors(const Dataset& data, std::size_t max_rows, std::uint64_t seed);

}  // namespace triax
