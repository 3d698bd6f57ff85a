#pragma once

#include <cstdint>

#include "json.hpp"

#include "triax/config.hpp"

namespace triax {

/// Analytic multiply-accumulate counts per stage.
///
///   clustering          T W' H' K C'                    (0 without clustering)
///   activity_attention  T A W H F                       (T W H F for the spatial-mean ablation)
///   encoder_projection  A * B * 3 T F d
///   encoder_attention   A * B * (T^2 d + T^2 d)         scores plus weighting
///   decoder             2 (A^2 F_out + A^2 F_out) + A F_out
///
/// B is the number of temporal branches (2 with masks, 1 without).
struct MaccReport {
  std::uint64_t clustering = 0;
  std::uint64_t activity_attention = 0;
  std::uint64_t encoder_projection = 0;
  std::uint64_t encoder_attention = 0;
  std::uint64_t decoder = 0;

  std::uint64_t encoder() const { return encoder_projection + encoder_attention; }
  std::uint64_t total() const {
    return clustering + activity_attention + encoder() + decoder;
  }
};

MaccReport macc_estimate(const ModelConfig& config);

nlohmann::ordered_json to_json(const MaccReport& r);

}  // namespace triax
