#include "triax/vlad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "triax/ops.hpp"

namespace triax {

void ClusterCodebook::validate() const {
  if (centroids.rank() != 2) throw ConfigError("codebook centroids must be K x C'");
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw ConfigError("codebook alpha must be positive and finite");
  if (!centroids.all_finite()) throw ConfigError("codebook centroids must be finite");
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double r = a[j] - b[j];
    d += r * r;
  }
  return d;
}

void check_feature_map(const Tensor& fm, const ClusterCodebook& cb) {
  if (fm.rank() != 4)
    throw ShapeError("feature map must be T x W' x H' x C', got " + shape_str(fm.shape()));
  if (fm.dim(3) != cb.channels())
    throw ShapeError("feature map channels " + std::to_string(fm.dim(3)) +
                     " do not match codebook C' " + std::to_string(cb.channels()));
}

}  // namespace

ClusterCodebook kmeans_init(const Tensor& descriptors, std::size_t k, std::uint64_t seed,
                            std::size_t max_iters, double alpha) {
  if (descriptors.rank() != 2) throw ShapeError("kmeans descriptors must be N x C'");
  if (k == 0) throw ConfigError("kmeans: K must be at least 1");
  if (max_iters == 0) throw ConfigError("kmeans: max_iters must be at least 1");
  const std::size_t n = descriptors.dim(0), c = descriptors.dim(1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

  std::vector<std::size_t> picked;
  for (std::size_t idx : order) {
    if (picked.size() == k) break;
    const auto row = descriptors.row(idx);
    const bool dup = std::any_of(picked.begin(), picked.end(), [&](std::size_t p) {
      const auto other = descriptors.row(p);
      return std::equal(row.begin(), row.end(), other.begin());
    });
    if (!dup) picked.push_back(idx);
  }
  if (picked.size() < k)
    throw ConfigError("kmeans: need at least " + std::to_string(k) +
                      " distinct descriptors, found " + std::to_string(picked.size()));

  Tensor centroids({k, c});
  for (std::size_t i = 0; i < k; ++i) {
    const auto src = descriptors.row(picked[i]);
    std::copy(src.begin(), src.end(), centroids.row(i).begin());
  }

  std::vector<std::size_t> assign(n, std::numeric_limits<std::size_t>::max());
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t q = 0; q < k; ++q) {
        const double d = sq_dist(descriptors.row(i), centroids.row(q));
        if (d < best_d) {
          best_d = d;
          best = q;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }

    std::vector<std::size_t> counts(k, 0);
    Tensor sums({k, c});
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      auto dst = sums.row(assign[i]);
      const auto src = descriptors.row(i);
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
    for (std::size_t q = 0; q < k; ++q) {
      auto dst = centroids.row(q);
      if (counts[q] > 0) {
        const auto s = sums.row(q);
        for (std::size_t j = 0; j < c; ++j) dst[j] = s[j] / static_cast<double>(counts[q]);
        continue;
      }
      // Empty cluster: move onto the descriptor farthest from its own centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = sq_dist(descriptors.row(i), centroids.row(assign[i]));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      const auto src = descriptors.row(far);
      std::copy(src.begin(), src.end(), dst.begin());
      assign[far] = q;
      changed = true;
    }
    if (!changed) break;
  }

  ClusterCodebook cb{std::move(centroids), alpha};
  cb.validate();
  return cb;
}

std::vector<double> soft_assign(std::span<const double> x, const ClusterCodebook& codebook) {
  const std::size_t k = codebook.clusters();
  if (x.size() != codebook.channels())
    throw ShapeError("soft_assign: descriptor length " + std::to_string(x.size()) +
                     " does not match C' " + std::to_string(codebook.channels()));
  std::vector<double> w(k);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < k; ++q) {
    w[q] = -codebook.alpha * sq_dist(x, codebook.centroids.row(q));
    mx = std::max(mx, w[q]);
  }
  double sum = 0.0;
  for (auto& v : w) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : w) v /= sum;
  return w;
}

Tensor vlad_encode(const Tensor& fm, const ClusterCodebook& codebook, Tensor* assignments) {
  check_feature_map(fm, codebook);
  const std::size_t T = fm.dim(0), W = fm.dim(1), H = fm.dim(2), C = fm.dim(3);
  const std::size_t K = codebook.clusters();
  const std::size_t positions = T * W * H;

  Tensor out({T, W, H, K, C});
  if (assignments) *assignments = Tensor({T, W, H, K});
  for (std::size_t p = 0; p < positions; ++p) {
    const auto x = fm.data().subspan(p * C, C);
    const auto w = soft_assign(x, codebook);
    for (std::size_t q = 0; q < K; ++q) {
      const auto c = codebook.centroids.row(q);
      double* dst = out.data().data() + (p * K + q) * C;
      for (std::size_t j = 0; j < C; ++j) dst[j] = w[q] * (x[j] - c[j]);
    }
    if (assignments) std::copy(w.begin(), w.end(), assignments->data().begin() + p * K);
  }
  return out;
}

void vlad_encode_backward(const Tensor& fm, const ClusterCodebook& codebook,
                          const Tensor& assignments, const Tensor& grad_out, CodebookGrad& grad,
                          Tensor* grad_fm) {
  check_feature_map(fm, codebook);
  const std::size_t C = fm.dim(3), K = codebook.clusters();
  const std::size_t positions = fm.size() / C;
  if (grad_out.size() != positions * K * C)
    throw ShapeError("vlad_encode_backward: gradient has " + std::to_string(grad_out.size()) +
                     " values, expected " + std::to_string(positions * K * C));
  if (assignments.size() != positions * K)
    throw ShapeError("vlad_encode_backward: assignment cache has wrong size");
  if (grad.centroids.shape() != codebook.centroids.shape())
    grad.centroids = zeros_like(codebook.centroids);
  if (grad_fm) *grad_fm = zeros_like(fm);

  std::vector<double> dw(K), ds(K), dist(K);
  for (std::size_t p = 0; p < positions; ++p) {
    const double* x = fm.data().data() + p * C;
    const double* w = assignments.data().data() + p * K;
    const double* g = grad_out.data().data() + p * K * C;
    double* gx = grad_fm ? grad_fm->data().data() + p * C : nullptr;

    double wdw = 0.0;
    for (std::size_t q = 0; q < K; ++q) {
      const auto c = codebook.centroids.row(q);
      double acc = 0.0, d = 0.0;
      for (std::size_t j = 0; j < C; ++j) {
        const double r = x[j] - c[j];
        acc += g[q * C + j] * r;
        d += r * r;
      }
      dw[q] = acc;
      dist[q] = d;
      wdw += w[q] * acc;
    }
    for (std::size_t q = 0; q < K; ++q) ds[q] = w[q] * (dw[q] - wdw);

    for (std::size_t q = 0; q < K; ++q) {
      const auto c = codebook.centroids.row(q);
      auto gc = grad.centroids.row(q);
      grad.alpha -= ds[q] * dist[q];
      const double dd = -codebook.alpha * ds[q];
      for (std::size_t j = 0; j < C; ++j) {
        const double r = x[j] - c[j];
        // residual path plus squared-distance path
        const double dx = w[q] * g[q * C + j] + 2.0 * dd * r;
        gc[j] -= dx;
        if (gx) gx[j] += dx;
      }
    }
  }
}

Tensor flatten_clusters(const Tensor& v) {
  if (v.rank() != 5)
    throw ShapeError("flatten_clusters expects T x W x H x K x C', got " + shape_str(v.shape()));
  return v.reshaped({v.dim(0), v.dim(1), v.dim(2), v.dim(3) * v.dim(4)});
}

Tensor unflatten_clusters(const Tensor& fcf, std::size_t k) {
  if (fcf.rank() != 4 || k == 0 || fcf.dim(3) % k != 0)
    throw ShapeError("cannot split feature axis of " + shape_str(fcf.shape()) + " into " +
                     std::to_string(k) + " clusters");
  return fcf.reshaped({fcf.dim(0), fcf.dim(1), fcf.dim(2), k, fcf.dim(3) / k});
}

Tensor vlad_aggregate(const Tensor& v) {
  if (v.rank() != 5)
    throw ShapeError("vlad_aggregate expects T x W x H x K x C', got " + shape_str(v.shape()));
  const std::size_t K = v.dim(3), C = v.dim(4);
  const std::size_t per = K * C;
  const std::size_t positions = v.size() / per;
  Tensor out({K, C});
  std::vector<double> column(positions);
  for (std::size_t e = 0; e < per; ++e) {
    for (std::size_t p = 0; p < positions; ++p) column[p] = v[p * per + e];
    std::sort(column.begin(), column.end());
    double s = 0.0;
    for (double x : column) s += x;
    out[e] = s;
  }
  return out;
}

}  // namespace triax
