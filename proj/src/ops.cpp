#include "triax/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace triax {

namespace {
void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2)
    throw ShapeError(std::string(what) + " must be a matrix, got " + shape_str(t.shape()));
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  const std::size_t m = a.dim(0), n = a.dim(1), p = b.dim(1);
  if (b.dim(0) != n)
    throw ShapeError("matmul dimension mismatch: " + shape_str(a.shape()) + " * " +
                     shape_str(b.shape()));
  Tensor c({m, p});
  const auto A = a.data();
  const auto B = b.data();
  auto C = c.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = A[i * n + k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) C[i * p + j] += aik * B[k * p + j];
    }
  return c;
}

Tensor transpose(const Tensor& m) {
  require_matrix(m, "transpose operand");
  const std::size_t r = m.dim(0), c = m.dim(1);
  Tensor t({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = m[i * c + j];
  return t;
}

MatmulGrads matmul_backward(const Tensor& a, const Tensor& b, const Tensor& grad_out) {
  require_matrix(grad_out, "matmul gradient");
  if (grad_out.dim(0) != a.dim(0) || grad_out.dim(1) != b.dim(1))
    throw ShapeError("matmul gradient shape " + shape_str(grad_out.shape()) +
                     " does not match product of " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  return {matmul(grad_out, transpose(b)), matmul(transpose(a), grad_out)};
}

Tensor softmax_lastdim(const Tensor& x, const Tensor* additive_mask) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  std::size_t mask_rows = 0;
  if (additive_mask) {
    const auto& ms = additive_mask->shape();
    const auto& xs = x.shape();
    const bool trailing =
        ms.size() <= xs.size() && std::equal(ms.rbegin(), ms.rend(), xs.rbegin());
    if (!trailing)
      throw ShapeError("softmax mask " + shape_str(ms) + " is not broadcast-compatible with " +
                       shape_str(xs));
    mask_rows = additive_mask->size() / n;
  }

  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * n;
    const double* mk = additive_mask ? additive_mask->data().data() + (r % mask_rows) * n : nullptr;
    double* out = y.data().data() + r * n;

    if (mk && std::all_of(mk, mk + n, [](double v) { return v <= 0.5 * kMaskedScore; }))
      throw NumericError("fully masked attention row");

    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      out[j] = in[j] + (mk ? mk[j] : 0.0);
      mx = std::max(mx, out[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[j] = std::exp(out[j] - mx);
      sum += out[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[j] /= sum;
  }
  return y;
}

Tensor softmax_lastdim_backward(const Tensor& y, const Tensor& grad_out) {
  if (y.shape() != grad_out.shape())
    throw ShapeError("softmax gradient shape " + shape_str(grad_out.shape()) + " vs " +
                     shape_str(y.shape()));
  const std::size_t n = y.shape().back();
  const std::size_t rows = y.size() / n;
  Tensor gx(y.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = y.data().data() + r * n;
    const double* g = grad_out.data().data() + r * n;
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += p[j] * g[j];
    double* out = gx.data().data() + r * n;
    for (std::size_t j = 0; j < n; ++j) out[j] = p[j] * (g[j] - dot);
  }
  return gx;
}

DropoutResult dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!training) return {x, Tensor(x.shape(), 1.0)};
  if (!(rate >= 0.0 && rate < 1.0))
    throw ConfigError("dropout rate must be in [0,1) in training mode, got " +
                      std::to_string(rate));
  Tensor scale(x.shape(), 1.0);
  if (rate > 0.0) {
    const double keep = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < scale.size(); ++i) scale[i] = uniform01(rng) < rate ? 0.0 : keep;
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * scale[i];
  return {std::move(out), std::move(scale)};
}

void fill_uniform(Tensor& t, double lo, double hi, Rng& rng) {
  for (auto& v : t.data()) v = lo + (hi - lo) * uniform01(rng);
}

}  // namespace triax
