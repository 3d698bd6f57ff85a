#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "support.hpp"
#include "triax/vlad.hpp"

using namespace triax;
using testsupport::random_tensor;

namespace {

ClusterCodebook codebook(std::initializer_list<std::initializer_list<double>> rows, double alpha) {
  ClusterCodebook cb;
  cb.centroids = Tensor::matrix(rows);
  cb.alpha = alpha;
  return cb;
}

// Best 2-partition of a 1-D point set by exhaustive enumeration; returns sorted means.
std::vector<double> best_two_means(const std::vector<double>& pts) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> out;
  const std::size_t n = pts.size();
  for (std::size_t mask = 1; mask + 1 < (1u << n); ++mask) {
    double s[2] = {0, 0}, c[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const int g = (mask >> i) & 1;
      s[g] += pts[i];
      c[g] += 1;
    }
    const double m0 = s[0] / c[0], m1 = s[1] / c[1];
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = ((mask >> i) & 1) ? m1 : m0;
      sse += (pts[i] - m) * (pts[i] - m);
    }
    if (sse < best) {
      best = sse;
      out = {std::min(m0, m1), std::max(m0, m1)};
    }
  }
  return out;
}

}  // namespace

TEST_CASE("kmeans: one point per cluster returns the points") {
  const Tensor pts = Tensor::matrix({{0, 0}, {5, 1}, {-3, 2}});
  const ClusterCodebook cb = kmeans_init(pts, 3, 11, 20);
  std::vector<std::vector<double>> got, want{{-3, 2}, {0, 0}, {5, 1}};
  for (std::size_t k = 0; k < 3; ++k) got.push_back({cb.centroids.at(k, 0), cb.centroids.at(k, 1)});
  std::sort(got.begin(), got.end());
  CHECK(got == want);
}

TEST_CASE("kmeans: 1-D example matches the exhaustive optimum") {
  const std::vector<double> pts{0, 1, 9, 10};
  const auto oracle = best_two_means(pts);
  REQUIRE(oracle == std::vector<double>{0.5, 9.5});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ClusterCodebook cb = kmeans_init(Tensor({4, 1}, pts), 2, seed, 50);
    std::vector<double> got{cb.centroids[0], cb.centroids[1]};
    std::sort(got.begin(), got.end());
    CHECK(got == oracle);
  }
}

TEST_CASE("kmeans: result is a Lloyd fixed point, seeded and alpha passed through") {
  Rng rng(12);
  const Tensor pts = random_tensor({60, 3}, rng);
  const ClusterCodebook a = kmeans_init(pts, 4, 5, 100, 2.5);
  const ClusterCodebook b = kmeans_init(pts, 4, 5, 100, 2.5);
  CHECK(a.centroids == b.centroids);
  CHECK(a.alpha == 2.5);

  std::vector<double> sums(4 * 3, 0.0), counts(4, 0.0);
  for (std::size_t n = 0; n < 60; ++n) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 4; ++k) {
      double d = 0;
      for (std::size_t j = 0; j < 3; ++j) d += std::pow(pts.at(n, j) - a.centroids.at(k, j), 2);
      if (d < bd) bd = d, best = k;
    }
    counts[best] += 1;
    for (std::size_t j = 0; j < 3; ++j) sums[best * 3 + j] += pts.at(n, j);
  }
  for (std::size_t k = 0; k < 4; ++k) {
    REQUIRE(counts[k] > 0);
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(std::abs(a.centroids.at(k, j) - sums[k * 3 + j] / counts[k]) < 1e-12);
  }
}

TEST_CASE("kmeans: too few distinct points") {
  const Tensor pts = Tensor::matrix({{1, 1}, {1, 1}, {2, 2}});
  CHECK_THROWS_AS(kmeans_init(pts, 3, 0, 10), ConfigError);
}

TEST_CASE("soft assignment") {
  const std::vector<double> x{0.0};
  CHECK(soft_assign(x, codebook({{3.0}}, 1.0)) == std::vector<double>{1.0});

  const auto sym = soft_assign(std::vector<double>{0.5}, codebook({{0.0}, {1.0}}, 3.0));
  CHECK(sym[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sym[1] == doctest::Approx(0.5).epsilon(1e-15));

  const auto w = soft_assign(x, codebook({{0.0}, {1.0}}, 1.0));
  const double e = std::exp(-1.0);
  CHECK(std::abs(w[0] - 1.0 / (1.0 + e)) < 1e-15);
  CHECK(std::abs(w[1] - e / (1.0 + e)) < 1e-15);
  CHECK(w[0] == doctest::Approx(0.7311).epsilon(1e-4));

  // Large alpha far from other centroids: no overflow, near one-hot.
  const auto far = soft_assign(std::vector<double>{100.0}, codebook({{0.0}, {100.0}}, 50.0));
  CHECK(far[1] == 1.0);
  CHECK(far[0] < 1e-6);
}

TEST_CASE("residual encoding values") {
  // x = 2, c = {0, 1}, alpha = 1.
  const Tensor fm({1, 1, 1, 1}, 2.0);
  const ClusterCodebook cb = codebook({{0.0}, {1.0}}, 1.0);
  const Tensor v = vlad_encode(fm, cb);
  REQUIRE(v.shape() == Shape{1, 1, 1, 2, 1});
  const double w0 = std::exp(-4.0) / (std::exp(-4.0) + std::exp(-1.0));
  CHECK(std::abs(v[0] - w0 * 2.0) < 1e-15);
  CHECK(std::abs(v[1] - (1.0 - w0) * 1.0) < 1e-15);
  CHECK(v[0] == doctest::Approx(0.0949).epsilon(1e-3));
  CHECK(v[1] == doctest::Approx(0.9526).epsilon(1e-4));

  const ClusterCodebook sharp = codebook({{2.0}, {50.0}}, 100.0);
  const Tensor own = vlad_encode(fm, sharp);
  CHECK(std::abs(own[0]) < 1e-15);
  CHECK(std::abs(own[1]) < 1e-6);
}

TEST_CASE("residual encoding shape and flatten round trip") {
  Rng rng(13);
  const Tensor fm = random_tensor({2, 2, 2, 4}, rng);
  ClusterCodebook cb;
  cb.centroids = random_tensor({3, 4}, rng);
  const Tensor v = vlad_encode(fm, cb);
  CHECK(v.shape() == Shape{2, 2, 2, 3, 4});
  const Tensor f = flatten_clusters(v);
  CHECK(f.shape() == Shape{2, 2, 2, 12});
  CHECK(f.at(1, 0, 1, 2 * 4 + 3) == v.at(1, 0, 1, 2, 3));
  CHECK(unflatten_clusters(f, 3) == v);
  CHECK_THROWS_AS(unflatten_clusters(f, 5), ShapeError);
}

TEST_CASE("residual encoding gradients") {
  Rng rng(14);
  const Tensor fm = random_tensor({2, 2, 1, 3}, rng);
  ClusterCodebook cb;
  cb.centroids = random_tensor({3, 3}, rng);
  cb.alpha = 1.7;
  const Tensor w = random_tensor({2, 2, 1, 3, 3}, rng);

  Tensor assign;
  vlad_encode(fm, cb, &assign);
  CodebookGrad g;
  Tensor gfm;
  vlad_encode_backward(fm, cb, assign, w, g, &gfm);

  CHECK(testsupport::grad_error(
            [&](const Tensor& c) {
              ClusterCodebook p = cb;
              p.centroids = c;
              return testsupport::weighted_sum(vlad_encode(fm, p), w);
            },
            cb.centroids, g.centroids) < 1e-6);
  CHECK(testsupport::grad_error(
            [&](const Tensor& a) {
              ClusterCodebook p = cb;
              p.alpha = a[0];
              return testsupport::weighted_sum(vlad_encode(fm, p), w);
            },
            Tensor::scalar(cb.alpha), Tensor::scalar(g.alpha)) < 1e-6);
  CHECK(testsupport::grad_error(
            [&](const Tensor& x) { return testsupport::weighted_sum(vlad_encode(x, cb), w); }, fm,
            gfm) < 1e-6);
}

TEST_CASE("aggregate is exactly invariant to frame order") {
  Rng rng(15);
  const Tensor fm = random_tensor({6, 2, 2, 3}, rng);
  ClusterCodebook cb;
  cb.centroids = random_tensor({2, 3}, rng);
  const Tensor base = vlad_aggregate(vlad_encode(fm, cb));
  CHECK(base.shape() == Shape{2, 3});

  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  Tensor shuffled(fm.shape());
  const std::size_t frame = 2 * 2 * 3;
  for (std::size_t t = 0; t < 6; ++t)
    std::copy_n(fm.values().begin() + perm[t] * frame, frame, shuffled.data().begin() + t * frame);
  CHECK(vlad_aggregate(vlad_encode(shuffled, cb)) == base);
}

TEST_CASE("codebook validation") {
  ClusterCodebook cb = codebook({{0.0}}, 0.0);
  CHECK_THROWS_AS(cb.validate(), ConfigError);
  cb.alpha = 1.0;
  cb.centroids[0] = NAN;
  CHECK_THROWS_AS(cb.validate(), ConfigError);
}
