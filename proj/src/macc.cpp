#include "triax/macc.hpp"

namespace triax {

MaccReport macc_estimate(const ModelConfig& config) {
  config.validate();
  using u64 = std::uint64_t;
  const u64 T = config.frames, W = config.grid_w, H = config.grid_h;
  const u64 C = config.channels, K = config.clusters, A = config.activities;
  const u64 F = config.feature_dim(), d = config.projection_dim(), D = config.decoder_dim();
  const u64 branches = config.encoder_options().directions().size();

  MaccReport r;
  r.clustering = config.use_clustering ? T * W * H * K * C : 0;
  r.activity_attention = config.use_activity_attention ? T * A * W * H * F : T * W * H * F;
  r.encoder_projection = A * branches * 3 * T * F * d;
  r.encoder_attention = A * branches * (T * T * d + T * T * d);
  r.decoder = 2 * (A * A * D + A * A * D) + A * D;
  return r;
}

nlohmann::ordered_json to_json(const MaccReport& r) {
  nlohmann::ordered_json j;
  j["clustering"] = r.clustering;
  j["activity_attention"] = r.activity_attention;
  j["encoder_projection"] = r.encoder_projection;
  j["encoder_attention"] = r.encoder_attention;
  j["decoder"] = r.decoder;
  j["total"] = r.total();
  return j;
}

}  // namespace triax
