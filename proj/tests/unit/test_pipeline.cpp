#include <cmath>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "support.hpp"
#include "triax/commands.hpp"
#include "triax/metrics.hpp"
#include "triax/synth.hpp"
#include "triax/train.hpp"

using namespace triax;
using testsupport::random_tensor;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.frames = 2;
  c.grid_w = 2;
  c.grid_h = 2;
  c.channels = 3;
  c.clusters = 2;
  c.activities = 2;
  c.proj_dim = 2;
  return c;
}

ModelParams random_model(const ModelConfig& c, Rng& rng) {
  Tensor labels({8, c.activities});
  for (auto& v : labels.data()) v = uniform01(rng) < 0.5 ? 1.0 : 0.0;
  const Tensor desc = random_tensor({4 * c.clusters, c.channels}, rng);
  ModelParams p = init_params(c, desc, labels, rng());
  if (!p.bank.masks.empty()) fill_uniform(p.bank.masks, 0.0, 0.5, rng);
  p.visit_trainable([&](std::string_view group, const std::string&, std::span<double> v) {
    if (group.starts_with("decoder"))
      for (auto& x : v) x = 2.0 * uniform01(rng) - 1.0;
  });
  return p;
}

double sq(double x) { return x * x; }

// Monolithic forward for the default configuration (clustering, activity
// masks, per-activity projections, both temporal masks averaged,
// association masks, tanh-clipped multi-dimensional decoder).
std::vector<double> reference_forward(const ModelConfig& c, const ModelParams& p, const Tensor& fm) {
  const std::size_t T = c.frames, W = c.grid_w, H = c.grid_h, C = c.channels, K = c.clusters,
                    A = c.activities, F = K * C, d = c.projection_dim();
  std::vector<double> fcf(T * W * H * F);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t w = 0; w < W; ++w)
      for (std::size_t h = 0; h < H; ++h) {
        std::vector<double> e(K);
        double z = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          double dist = 0.0;
          for (std::size_t j = 0; j < C; ++j) dist += sq(fm.at(t, w, h, j) - p.codebook.centroids.at(k, j));
          e[k] = std::exp(-p.codebook.alpha * dist);
          z += e[k];
        }
        for (std::size_t k = 0; k < K; ++k)
          for (std::size_t j = 0; j < C; ++j)
            fcf[((t * W + w) * H + h) * F + k * C + j] =
                e[k] / z * (fm.at(t, w, h, j) - p.codebook.centroids.at(k, j));
      }

  std::vector<double> fa(A * d, 0.0);
  for (std::size_t a = 0; a < A; ++a) {
    std::vector<double> seq(T * F, 0.0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t s = 0; s < W * H; ++s)
        for (std::size_t f = 0; f < F; ++f) seq[t * F + f] += p.bank.masks[a * W * H + s] * fcf[(t * W * H + s) * F + f];
    const auto& head = p.encoder.head(a);
    std::vector<double> q(T * d, 0.0), k(T * d, 0.0), v(T * d, 0.0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t f = 0; f < F; ++f) {
          q[t * d + j] += seq[t * F + f] * head.query.at(f, j);
          k[t * d + j] += seq[t * F + f] * head.key.at(f, j);
          v[t * d + j] += seq[t * F + f] * head.value.at(f, j);
        }
    for (int dir : {+1, -1})
      for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> wgt(T, 0.0);
        double z = 0.0;
        for (std::size_t s = 0; s < T; ++s) {
          if (dir > 0 ? s > t : s < t) continue;
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += q[t * d + j] * k[s * d + j];
          wgt[s] = std::exp(dot / std::sqrt(static_cast<double>(d)));
          z += wgt[s];
        }
        for (std::size_t j = 0; j < d; ++j)
          for (std::size_t s = 0; s < T; ++s) fa[a * d + j] += 0.5 * wgt[s] / z * v[s * d + j];
      }
  }

  const std::size_t D = d;
  auto proj = [&](const Tensor& w, std::size_t i, std::size_t e) {
    double s = 0.0;
    for (std::size_t f = 0; f < D; ++f) s += fa[i * D + f] * w.at(f, e);
    return s;
  };
  std::vector<double> logits(A);
  for (std::size_t i = 0; i < A; ++i) {
    logits[i] = p.decoder.out_bias[i];
    for (std::size_t e = 0; e < D; ++e) {
      double o = 0.0;
      for (int b = 0; b < 2; ++b) {
        const BranchParams& bp = b == 0 ? p.decoder.positive : p.decoder.negative;
        const Tensor& mask = b == 0 ? p.masks.positive : p.masks.negative;
        std::vector<double> wgt(A);
        double z = 0.0;
        for (std::size_t j = 0; j < A; ++j) {
          const double u = proj(bp.w_query, i, e) + bp.bias[e] + proj(bp.w_key, j, e);
          wgt[j] = std::exp(5.0 * std::tanh(u / 5.0)) * (mask.at(i, j) + 1e-6);
          z += wgt[j];
        }
        for (std::size_t j = 0; j < A; ++j) o += wgt[j] / z * proj(p.decoder.value, j, e);
      }
      logits[i] += p.decoder.out_weight.at(i, e) * o;
    }
  }
  return logits;
}

Dataset toy_dataset(const ModelConfig& c, std::size_t n, std::uint64_t seed) {
  SynthSpec s;
  s.samples = n;
  s.frames = c.frames;
  s.grid_w = c.grid_w;
  s.grid_h = c.grid_h;
  s.channels = c.channels;
  s.activities = c.activities;
  return synth_dataset(s, seed);
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("full forward matches a monolithic reference") {
  const ModelConfig c = small_config();
  Rng rng(51);
  for (int trial = 0; trial < 5; ++trial) {
    const ModelParams p = random_model(c, rng);
    const Tensor fm = random_tensor({2, 2, 2, 3}, rng);
    const Tensor logits = forward(c, p, fm);
    REQUIRE(logits.shape() == Shape{2});
    const auto ref = reference_forward(c, p, fm);
    for (std::size_t a = 0; a < 2; ++a) CHECK(std::abs(logits[a] - ref[a]) < 1e-10);
  }
}

TEST_CASE("output length and static single-frame mode") {
  Rng rng(52);
  ModelConfig c = small_config();
  c.frames = 1;
  c.activities = 3;
  const ModelParams p = random_model(c, rng);
  const Tensor logits = forward(c, p, random_tensor({1, 2, 2, 3}, rng));
  CHECK(logits.size() == 3);
  CHECK(logits.all_finite());
}

TEST_CASE("forward reports the failing stage") {
  Rng rng(53);
  const ModelConfig c = small_config();
  ModelParams p = random_model(c, rng);
  CHECK_THROWS_AS(forward(c, p, Tensor({3, 2, 2, 3})), ShapeError);
  p.decoder.value = Tensor({3, 3});
  try {
    forward(c, p, Tensor({2, 2, 2, 3}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).starts_with("decoder: "));
  }
}

TEST_CASE("gradient gate on every ablation configuration") {
  std::vector<std::pair<const char*, ModelConfig>> configs;
  auto base = gradcheck_config();
  configs.push_back({"default", base});
  auto c = base; c.use_clustering = false; configs.push_back({"no clustering", c});
  c = base; c.use_activity_attention = false; configs.push_back({"no activity masks", c});
  c = base; c.per_activity_projections = false; configs.push_back({"shared projections", c});
  c = base; c.temporal_masks = false; configs.push_back({"no temporal masks", c});
  c = base; c.association_masks = false; configs.push_back({"no association masks", c});
  c = base; c.multi_dim_decoder = false; configs.push_back({"dot-product decoder", c});
  c = base; c.fusion = BranchFusion::concat; configs.push_back({"concat fusion", c});
  c = base; c.frames = 1; configs.push_back({"static", c});
  for (const auto& [name, config] : configs)
    for (std::uint64_t seed : {1u, 2u}) {
      const auto report = run_gradcheck(config, seed);
      CHECK(!report.empty());
      for (const auto& r : report)
        CHECK_MESSAGE(r.max_rel_error < kGradcheckTolerance, name << " / " << r.group << " " << r.max_rel_error);
    }
}

TEST_CASE("gradcheck lists every group and catches a corrupted gradient") {
  const auto ok = run_gradcheck(gradcheck_config(), 0);
  std::vector<std::string> groups;
  for (const auto& r : ok) groups.push_back(r.group);
  CHECK(groups == std::vector<std::string>{"centroids", "alpha", "activity_masks", "encoder_query",
                                           "encoder_key", "encoder_value", "decoder_align",
                                           "decoder_value", "decoder_output"});
  const auto bad = run_gradcheck(gradcheck_config(), 0, true);
  bool caught = false;
  for (const auto& r : bad) caught = caught || (r.group == "encoder_value" && r.max_rel_error > 1e-3);
  CHECK(caught);
}

TEST_CASE("params file round trip and layout checks") {
  Rng rng(54);
  const ModelConfig c = small_config();
  const ModelParams p = random_model(c, rng);
  const auto dir = testsupport::scratch_dir("params");
  save_params(dir / "p.bin", p);
  const ModelParams q = load_params(dir / "p.bin", c);
  const Tensor fm = random_tensor({2, 2, 2, 3}, rng);
  CHECK(forward(c, q, fm) == forward(c, p, fm));
  save_params(dir / "q.bin", q);
  CHECK(file_bytes(dir / "p.bin") == file_bytes(dir / "q.bin"));

  ModelConfig other = c;
  other.clusters = 3;
  CHECK_THROWS_AS(load_params(dir / "p.bin", other), IoError);
  other = c;
  other.use_activity_attention = false;
  CHECK_THROWS_AS(load_params(dir / "p.bin", other), IoError);
  CHECK_THROWS_AS(load_params(dir / "missing.bin", c), IoError);
}

TEST_CASE("training: deterministic, thread-count invariant, masks from labels") {
  ModelConfig c = small_config();
  c.epochs = 4;
  c.batch_size = 10;
  c.base_lr = 1e-2;
  c.seed = 9;
  const Dataset data = toy_dataset(c, 30, 4);

  const TrainResult a = train(c, data);
  const TrainResult b = train(c, data);
  c.threads = 3;
  const TrainResult t = train(c, data);

  const auto dir = testsupport::scratch_dir("train_det");
  save_params(dir / "a.bin", a.params);
  save_params(dir / "b.bin", b.params);
  save_params(dir / "t.bin", t.params);
  CHECK(file_bytes(dir / "a.bin") == file_bytes(dir / "b.bin"));
  CHECK(file_bytes(dir / "a.bin") == file_bytes(dir / "t.bin"));
  REQUIRE(a.log.size() == 4);
  CHECK(a.log[3].loss == t.log[3].loss);

  const AssociationMasks m = build_assoc_masks(data.labels);
  CHECK(a.params.masks.positive == m.positive);
  CHECK(a.params.masks.negative == m.negative);
}

TEST_CASE("training lowers the loss on a separable toy set") {
  // Clean signatures, no noise: each activity is visible at its own cell.
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ModelConfig c = small_config();
    c.frames = 4;
    c.grid_w = c.grid_h = 2;
    c.channels = 4;
    c.activities = 3;
    c.proj_dim = 0;
    c.epochs = 50;
    c.batch_size = 16;
    c.base_lr = 5e-3;
    c.seed = seed;
    SynthSpec s;
    s.samples = 48;
    s.frames = 4;
    s.grid_w = s.grid_h = 2;
    s.channels = 4;
    s.activities = 3;
    s.noise = 0.0;
    const Dataset data = synth_dataset(s, 100 + seed);
    const TrainResult r = train(c, data);
    if (r.log.back().loss <= r.log.front().loss && dataset_loss(c, r.params, data) < r.initial_loss)
      ++improved;
  }
  CHECK(improved >= 4);
}

TEST_CASE("training rejects a dataset for another activity count") {
  ModelConfig c = small_config();
  c.epochs = 1;
  ModelConfig three = c;
  three.activities = 3;
  CHECK_THROWS_AS(train(c, toy_dataset(three, 6, 1)), std::exception);
}

TEST_CASE("training surfaces a non-finite loss with epoch and step") {
  ModelConfig c = small_config();
  c.epochs = 2;
  c.use_clustering = false;
  c.channels = 3;
  Dataset data = toy_dataset(c, 6, 2);
  const ModelParams init = [&] {
    Rng rng(3);
    return random_model(c, rng);
  }();
  data.features[0][0] = 1e200;  // overflows the encoder scores
  try {
    train_from(c, data, init);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string what = e.what();
    CHECK(what.find("epoch") != std::string::npos);
  }
}
