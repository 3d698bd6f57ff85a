#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "doctest.h"
#include "support.hpp"
#include "triax/augment.hpp"
#include "triax/macc.hpp"
#include "triax/metrics.hpp"
#include "triax/synth.hpp"

using namespace triax;

TEST_CASE("dataset round trip and file layout") {
  SynthSpec s;
  s.samples = 7;
  s.frames = 3;
  s.grid_w = 2;
  s.grid_h = 3;
  s.channels = 2;
  s.activities = 5;
  const Dataset d = synth_dataset(s, 1);
  const auto dir = testsupport::scratch_dir("dataset");
  save_dataset(dir, d);
  std::size_t tnsr = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) tnsr += e.path().extension() == ".tnsr";
  CHECK(tnsr == 7);
  CHECK(std::filesystem::exists(dir / "sample_000006.tnsr"));

  std::ifstream csv(dir / "labels.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 4);
    ++rows;
  }
  CHECK(rows == 7);

  const Dataset back = load_dataset(dir);
  CHECK(back.labels == d.labels);
  for (std::size_t i = 0; i < 7; ++i) CHECK(back.features[i] == d.features[i]);
  CHECK_THROWS_AS(load_dataset(dir / "nope"), IoError);
}

TEST_CASE("descriptor sampling") {
  SynthSpec s;
  s.samples = 3;
  const Dataset d = synth_dataset(s, 2);
  const Tensor all = collect_descriptors(d, 100000, 0);
  CHECK(all.shape() == Shape{3 * 8 * 4 * 4, 8});
  const Tensor some = collect_descriptors(d, 50, 7);
  CHECK(some.shape() == Shape{50, 8});
  CHECK(collect_descriptors(d, 50, 7) == some);
}

TEST_CASE("synth: noiseless single activity touches only its cell and window") {
  SynthSpec s;
  s.samples = 40;
  s.noise = 0.0;
  s.rates = {0.5, 0.0, 0.0, 0.0};
  s.fill_defaults();
  const Dataset d = synth_dataset(s, 3);
  const auto [cw, ch] = s.cells[0];
  const auto [t0, t1] = s.windows[0];
  std::size_t active = 0;
  for (std::size_t n = 0; n < d.size(); ++n) {
    const bool on = d.labels.at(n, 0) == 1.0;
    active += on;
    for (std::size_t a = 1; a < 4; ++a) CHECK(d.labels.at(n, a) == 0.0);
    const Tensor& fm = d.features[n];
    for (std::size_t t = 0; t < s.frames; ++t)
      for (std::size_t w = 0; w < s.grid_w; ++w)
        for (std::size_t h = 0; h < s.grid_h; ++h)
          for (std::size_t c = 0; c < s.channels; ++c) {
            const bool inside = on && w == cw && h == ch && t >= t0 && t < t1;
            if (!inside) CHECK(fm.at(t, w, h, c) == 0.0);
          }
  }
  CHECK(active > 0);
}

TEST_CASE("synth: co-occurrence statistics") {
  SynthSpec s;
  s.samples = 10000;
  s.frames = 1;
  s.grid_w = s.grid_h = 2;
  s.channels = 1;
  s.activities = 4;
  s.rates = {0.3, 0.3, 0.2, 0.4};
  s.fill_defaults();
  s.cooccurrence.at(0, 1) = s.cooccurrence.at(1, 0) = 0.95;
  const Dataset d = synth_dataset(s, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    double ni = 0;
    std::vector<double> nij(4, 0.0);
    for (std::size_t n = 0; n < d.size(); ++n) {
      if (d.labels.at(n, i) != 1.0) continue;
      ni += 1;
      for (std::size_t j = 0; j < 4; ++j) nij[j] += d.labels.at(n, j);
    }
    CHECK(std::abs(ni / d.size() - s.rates[i]) < 0.03);
    for (std::size_t j = 0; j < 4; ++j)
      CHECK_MESSAGE(std::abs(nij[j] / ni - s.cooccurrence.at(i, j)) < 0.03, i << "," << j);
  }
  CHECK(synth_dataset(s, 4).labels == d.labels);
}

TEST_CASE("synth: invalid specs") {
  SynthSpec s;
  s.fill_defaults();
  s.cooccurrence.at(0, 1) = 0.9;  // not symmetric
  CHECK_THROWS_AS(synth_dataset(s, 0), ConfigError);
  s.cooccurrence.at(1, 0) = 0.9;
  s.cooccurrence.at(0, 2) = s.cooccurrence.at(2, 0) = 0.9;  // activity 0 coupled twice
  CHECK_THROWS_AS(synth_dataset(s, 0), ConfigError);
  SynthSpec w;
  w.windows = {{0, 9}, {0, 1}, {0, 1}, {0, 1}};
  CHECK_THROWS_AS(synth_dataset(w, 0), ConfigError);
}

TEST_CASE("augment: T=9 keeps every third frame from the drawn phase") {
  Tensor fm({9, 1, 1, 1});
  for (std::size_t t = 0; t < 9; ++t) fm[t] = static_cast<double>(t);
  const AugmentSpec spec{3, 3, 0, 0};
  std::set<std::size_t> phases;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    AugmentDraw draw;
    const Tensor out = augment(fm, spec, seed, &draw);
    REQUIRE(out.shape() == Shape{3, 1, 1, 1});
    phases.insert(draw.phase);
    for (std::size_t i = 0; i < 3; ++i) CHECK(out[i] == static_cast<double>(draw.phase + 3 * i));
  }
  CHECK(phases == std::set<std::size_t>{0, 1, 2});
}

TEST_CASE("augment: one crop for all frames, full crop is temporal only") {
  Rng rng(61);
  const Tensor fm = testsupport::random_tensor({12, 4, 3, 2}, rng);
  const AugmentSpec spec{3, 3, 2, 2};
  AugmentDraw draw;
  const Tensor out = augment(fm, spec, 17, &draw);
  REQUIRE(out.shape() == Shape{3, 2, 2, 2});
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t t = draw.phase + 3 * (draw.start + i);
    for (std::size_t w = 0; w < 2; ++w)
      for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t c = 0; c < 2; ++c)
          CHECK(out.at(i, w, h, c) == fm.at(t, draw.crop_x + w, draw.crop_y + h, c));
  }
  CHECK(apply_augment(fm, spec, draw) == out);
  CHECK(augment(fm, spec, 17) == out);

  const AugmentSpec full{3, 4, 4, 3};
  AugmentDraw d2;
  const Tensor whole = augment(fm, full, 5, &d2);
  CHECK(d2.crop_x == 0);
  CHECK(d2.crop_y == 0);
  CHECK(d2.start == 0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t s = 0; s < 4 * 3 * 2; ++s) CHECK(whole[i * 24 + s] == fm[(d2.phase + 3 * i) * 24 + s]);

  CHECK_THROWS_AS(augment(fm, {3, 5, 0, 0}, 0), ConfigError);
  CHECK_THROWS_AS(augment(fm, {3, 2, 5, 1}, 0), ConfigError);
  CHECK(augment_center(fm, spec).shape() == Shape{3, 2, 2, 2});
}

TEST_CASE("metrics: worked cases") {
  const Tensor truth = Tensor::matrix({{1, 1, 0}});
  const Tensor scores = Tensor::matrix({{0.9, 0.2, 0.7}});
  const Metrics m = compute_metrics(scores, truth, 0.5);
  CHECK(m.per_label_accuracy == doctest::Approx(1.0 / 3.0));
  CHECK(m.precision_micro == doctest::Approx(0.5));
  CHECK(m.recall_micro == doctest::Approx(0.5));
  CHECK(m.f1_micro == doctest::Approx(0.5));
  CHECK(m.excluded_classes == 1);

  const Metrics perfect = compute_metrics(Tensor::matrix({{0.9, 0.1}, {0.2, 0.8}}),
                                          Tensor::matrix({{1, 0}, {0, 1}}), 0.5);
  for (double v : {perfect.per_label_accuracy, perfect.precision_micro, perfect.recall_micro,
                   perfect.f1_micro, perfect.precision_macro, perfect.recall_macro, perfect.f1_macro,
                   perfect.map})
    CHECK(v == 1.0);

  const Metrics none = compute_metrics(Tensor::matrix({{0.1, 0.1}}), Tensor::matrix({{1, 0}}), 0.5);
  CHECK(none.recall_micro == 0.0);
  CHECK(none.precision_micro == 0.0);
  CHECK(none.f1_micro == 0.0);
}

TEST_CASE("metrics: average precision by hand") {
  // One class, ranking 0.9(+), 0.8(-), 0.7(+), 0.1(-): AP = (1/1 + 2/3) / 2.
  const Metrics m = compute_metrics(Tensor({4, 1}, {0.9, 0.8, 0.7, 0.1}), Tensor({4, 1}, {1, 0, 1, 0}), 0.5);
  CHECK(m.map == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  // Macro F1 is the mean of per-class F1.
  const Metrics two = compute_metrics(Tensor::matrix({{0.9, 0.9}, {0.1, 0.9}}), Tensor::matrix({{1, 1}, {1, 0}}), 0.5);
  const double f_a = 2 * 1.0 * 0.5 / 1.5, f_b = 2 * 0.5 * 1.0 / 1.5;
  CHECK(two.f1_macro == doctest::Approx((f_a + f_b) / 2));

  const auto j = to_json(two);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"per_label_accuracy", "precision_micro", "recall_micro", "f1_micro",
                                         "precision_macro", "recall_macro", "f1_macro", "map",
                                         "excluded_classes"});
}

namespace {

// Counts multiply-accumulates by walking the loop nests of each stage.
std::uint64_t enumerate_maccs(const ModelConfig& c) {
  const std::size_t T = c.frames, W = c.grid_w, H = c.grid_h, C = c.channels, K = c.clusters,
                    A = c.activities, F = c.feature_dim(), d = c.projection_dim(), D = c.decoder_dim();
  const std::size_t B = c.temporal_masks ? 2 : 1;
  std::uint64_t n = 0;
  if (c.use_clustering)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t s = 0; s < W * H; ++s)
        for (std::size_t k = 0; k < K; ++k)
          for (std::size_t j = 0; j < C; ++j) ++n;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t a = 0; a < (c.use_activity_attention ? A : 1); ++a)
      for (std::size_t s = 0; s < W * H; ++s)
        for (std::size_t f = 0; f < F; ++f) ++n;
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t m = 0; m < 3; ++m)
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t f = 0; f < F; ++f)
            for (std::size_t j = 0; j < d; ++j) ++n;
      for (std::size_t pass = 0; pass < 2; ++pass)
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t s = 0; s < T; ++s)
            for (std::size_t j = 0; j < d; ++j) ++n;
    }
  for (std::size_t branch = 0; branch < 2; ++branch)
    for (std::size_t pass = 0; pass < 2; ++pass)
      for (std::size_t i = 0; i < A; ++i)
        for (std::size_t j = 0; j < A; ++j)
          for (std::size_t e = 0; e < D; ++e) ++n;
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t e = 0; e < D; ++e) ++n;
  return n;
}

}  // namespace

TEST_CASE("macc: hand counts") {
  ModelConfig ones;
  ones.frames = ones.grid_w = ones.grid_h = ones.channels = ones.clusters = ones.activities = 1;
  const MaccReport r1 = macc_estimate(ones);
  // 1 + 1 + 2*3 + 2*2 + 2*(1+1) + 1
  CHECK(r1.total() == 17);
  CHECK(r1.total() == enumerate_maccs(ones));

  ModelConfig tiny;
  tiny.frames = 2;
  tiny.activities = 2;
  tiny.grid_w = tiny.grid_h = 2;
  tiny.clusters = 2;
  tiny.channels = 2;
  tiny.proj_dim = 2;
  const MaccReport r = macc_estimate(tiny);
  CHECK(r.clustering == 32);
  CHECK(r.activity_attention == 64);
  CHECK(r.encoder() == 256);
  CHECK(r.decoder == 36);
  CHECK(r.total() == 388);
  CHECK(r.total() == enumerate_maccs(tiny));

  Rng rng(71);
  for (int i = 0; i < 20; ++i) {
    ModelConfig c;
    c.frames = 1 + rng() % 6;
    c.grid_w = 1 + rng() % 4;
    c.grid_h = 1 + rng() % 4;
    c.channels = 1 + rng() % 4;
    c.clusters = 1 + rng() % 3;
    c.activities = 1 + rng() % 4;
    c.proj_dim = rng() % 5;
    c.use_clustering = rng() % 2;
    c.use_activity_attention = rng() % 2;
    c.temporal_masks = rng() % 2;
    c.fusion = rng() % 2 ? BranchFusion::concat : BranchFusion::average;
    CHECK(macc_estimate(c).total() == enumerate_maccs(c));
  }
}

TEST_CASE("macc: quadratic in T, linear in d") {
  ModelConfig c;
  const auto base = macc_estimate(c).encoder_attention;
  c.frames *= 2;
  CHECK(macc_estimate(c).encoder_attention == 4 * base);
  c.frames /= 2;
  c.proj_dim = 2 * c.projection_dim();
  CHECK(macc_estimate(c).encoder_attention == 2 * base);
}
