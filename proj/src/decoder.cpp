#include "triax/decoder.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace triax {

AssociationMasks build_assoc_masks(const Tensor& labels) {
  if (labels.rank() != 2) throw ShapeError("labels must be N x A, got " + shape_str(labels.shape()));
  const std::size_t N = labels.dim(0), A = labels.dim(1);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != 0.0 && labels[i] != 1.0)
      throw ConfigError("labels must be binary; entry " + std::to_string(i) + " is " +
                        std::to_string(labels[i]));

  std::vector<std::size_t> count(A, 0), joint(A * A, 0);
  for (std::size_t n = 0; n < N; ++n) {
    const auto row = labels.row(n);
    for (std::size_t i = 0; i < A; ++i) {
      if (row[i] == 0.0) continue;
      ++count[i];
      for (std::size_t j = 0; j < A; ++j)
        if (row[j] != 0.0) ++joint[i * A + j];
    }
  }
  AssociationMasks m{Tensor({A, A}), Tensor({A, A}, 1.0)};
  for (std::size_t i = 0; i < A; ++i) {
    if (count[i] == 0) continue;
    for (std::size_t j = 0; j < A; ++j) {
      const double p = static_cast<double>(joint[i * A + j]) / static_cast<double>(count[i]);
      m.positive[i * A + j] = p;
      m.negative[i * A + j] = 1.0 - p;
    }
  }
  return m;
}

void write_mask_csv(const std::filesystem::path& path, const Tensor& mask) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << std::setprecision(17);
  const std::size_t A = mask.dim(0), B = mask.dim(1);
  for (std::size_t i = 0; i < A; ++i) {
    for (std::size_t j = 0; j < B; ++j) os << (j ? "," : "") << mask[i * B + j];
    os << '\n';
  }
}

Tensor read_mask_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError(path.string() + ": bad value '" + cell + "'");
      }
      ++c;
    }
    if (rows == 0) cols = c;
    if (c != cols) throw IoError(path.string() + ": ragged row " + std::to_string(rows));
    ++rows;
  }
  if (rows == 0) throw IoError(path.string() + ": empty mask file");
  return Tensor({rows, cols}, std::move(values));
}

DecoderParams DecoderParams::random(std::size_t activities, std::size_t dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  auto branch = [&] {
    BranchParams b{Tensor({dim, dim}), Tensor({dim, dim}), Tensor({dim})};
    fill_uniform(b.w_query, -bound, bound, rng);
    fill_uniform(b.w_key, -bound, bound, rng);
    return b;
  };
  DecoderParams p;
  p.positive = branch();
  p.negative = branch();
  p.value = Tensor({dim, dim});
  fill_uniform(p.value, -bound, bound, rng);
  p.out_weight = Tensor({activities, dim});
  fill_uniform(p.out_weight, -bound, bound, rng);
  p.out_bias = Tensor({activities});
  return p;
}

AssociationMasks effective_branch_masks(const AssociationMasks& masks,
                                        const DecoderOptions& options) {
  if (options.association_masks) return masks;
  const std::size_t A = masks.activities();
  AssociationMasks m{Tensor({A, A}), Tensor({A, A})};
  for (std::size_t i = 0; i < A; ++i)
    for (std::size_t j = 0; j < A; ++j) {
      m.positive[i * A + j] = j <= i ? 1.0 : 0.0;
      m.negative[i * A + j] = j >= i ? 1.0 : 0.0;
    }
  return m;
}

namespace {

void check_decoder(const Tensor& fa, const AssociationMasks& masks, const DecoderParams& params) {
  if (fa.rank() != 2) throw ShapeError("decoder input must be A x D, got " + shape_str(fa.shape()));
  const std::size_t A = fa.dim(0), D = fa.dim(1);
  if (masks.positive.shape() != Shape{A, A} || masks.negative.shape() != Shape{A, A})
    throw ShapeError("association masks must be " + shape_str({A, A}));
  if (params.value.shape() != Shape{D, D} || params.out_weight.shape() != Shape{A, D} ||
      params.positive.w_query.shape() != Shape{D, D})
    throw ShapeError("decoder parameters do not match input " + shape_str(fa.shape()));
}

void add_into(Tensor& dst, const Tensor& src) {
  if (dst.shape() != src.shape()) dst = zeros_like(src);
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

// Attention for one branch; fills the cache entry and returns O_m (A x D).
Tensor branch_forward(const Tensor& fa, const Tensor& values, const Tensor& mask,
                      const BranchParams& bp, const DecoderOptions& opt,
                      DecoderCache::Branch& out) {
  const std::size_t A = fa.dim(0), D = fa.dim(1);
  out.query = matmul(fa, bp.w_query);
  for (std::size_t i = 0; i < A; ++i)
    for (std::size_t e = 0; e < D; ++e) out.query[i * D + e] += bp.bias[e];
  out.key = matmul(fa, bp.w_key);
  out.attention = Tensor({A, A, D});
  if (opt.multi_dim) out.squashed = Tensor({A, A, D});

  std::vector<double> log_mask(A * A);
  for (std::size_t k = 0; k < A * A; ++k) log_mask[k] = std::log(mask[k] + opt.mask_epsilon);

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));
  std::vector<double> s(A);
  for (std::size_t i = 0; i < A; ++i) {
    if (opt.multi_dim) {
      for (std::size_t e = 0; e < D; ++e) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < A; ++j) {
          const double th = std::tanh((out.query[i * D + e] + out.key[j * D + e]) / opt.score_clip);
          out.squashed[(i * A + j) * D + e] = th;
          s[j] = opt.score_clip * th + log_mask[i * A + j];
          mx = std::max(mx, s[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < A; ++j) sum += (s[j] = std::exp(s[j] - mx));
        for (std::size_t j = 0; j < A; ++j) out.attention[(i * A + j) * D + e] = s[j] / sum;
      }
    } else {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < A; ++j) {
        double dot = 0.0;
        for (std::size_t e = 0; e < D; ++e) dot += out.query[i * D + e] * out.key[j * D + e];
        s[j] = dot * inv_sqrt_d + log_mask[i * A + j];
        mx = std::max(mx, s[j]);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < A; ++j) sum += (s[j] = std::exp(s[j] - mx));
      for (std::size_t j = 0; j < A; ++j)
        for (std::size_t e = 0; e < D; ++e) out.attention[(i * A + j) * D + e] = s[j] / sum;
    }
  }

  Tensor o({A, D});
  for (std::size_t i = 0; i < A; ++i)
    for (std::size_t j = 0; j < A; ++j)
      for (std::size_t e = 0; e < D; ++e)
        o[i * D + e] += out.attention[(i * A + j) * D + e] * values[j * D + e];
  return o;
}

// Reverse pass for one branch. Accumulates into grad_values, grads and grad_fa.
void branch_backward(const Tensor& fa, const Tensor& values, const BranchParams& bp,
                     const DecoderOptions& opt, const DecoderCache::Branch& c,
                     const Tensor& grad_o, Tensor& grad_values, BranchParams& grads,
                     Tensor& grad_fa) {
  const std::size_t A = fa.dim(0), D = fa.dim(1);
  Tensor dq({A, D}), dk({A, D});
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));
  std::vector<double> dalpha(A);

  for (std::size_t i = 0; i < A; ++i) {
    if (opt.multi_dim) {
      for (std::size_t e = 0; e < D; ++e) {
        const double go = grad_o[i * D + e];
        double dot = 0.0;
        for (std::size_t j = 0; j < A; ++j) {
          const double a = c.attention[(i * A + j) * D + e];
          dalpha[j] = go * values[j * D + e];
          grad_values[j * D + e] += a * go;
          dot += a * dalpha[j];
        }
        for (std::size_t j = 0; j < A; ++j) {
          const std::size_t idx = (i * A + j) * D + e;
          const double ds = c.attention[idx] * (dalpha[j] - dot);
          const double th = c.squashed[idx];
          const double dz = ds * (1.0 - th * th);
          dq[i * D + e] += dz;
          dk[j * D + e] += dz;
        }
      }
    } else {
      double dot = 0.0;
      for (std::size_t j = 0; j < A; ++j) {
        const double a = c.attention[(i * A + j) * D];
        double acc = 0.0;
        for (std::size_t e = 0; e < D; ++e) {
          acc += grad_o[i * D + e] * values[j * D + e];
          grad_values[j * D + e] += a * grad_o[i * D + e];
        }
        dalpha[j] = acc;
        dot += a * acc;
      }
      for (std::size_t j = 0; j < A; ++j) {
        const double ds = c.attention[(i * A + j) * D] * (dalpha[j] - dot) * inv_sqrt_d;
        for (std::size_t e = 0; e < D; ++e) {
          dq[i * D + e] += ds * c.key[j * D + e];
          dk[j * D + e] += ds * c.query[i * D + e];
        }
      }
    }
  }

  Tensor db({D});
  for (std::size_t i = 0; i < A; ++i)
    for (std::size_t e = 0; e < D; ++e) db[e] += dq[i * D + e];
  add_into(grads.bias, db);
  const Tensor fat = transpose(fa);
  add_into(grads.w_query, matmul(fat, dq));
  add_into(grads.w_key, matmul(fat, dk));
  add_into(grad_fa, matmul(dq, transpose(bp.w_query)));
  add_into(grad_fa, matmul(dk, transpose(bp.w_key)));
}

}  // namespace

Tensor decode(const Tensor& fa, const AssociationMasks& masks, const DecoderParams& params,
              const DecoderOptions& options, Rng* rng, DecoderCache* cache) {
  check_decoder(fa, masks, params);
  const std::size_t A = fa.dim(0), D = fa.dim(1);
  const AssociationMasks m = effective_branch_masks(masks, options);

  DecoderCache local;
  DecoderCache& c = cache ? *cache : local;
  c.input = fa;
  c.values = matmul(fa, params.value);
  c.fused = branch_forward(fa, c.values, m.positive, params.positive, options, c.positive);
  add_into(c.fused, branch_forward(fa, c.values, m.negative, params.negative, options, c.negative));

  if (options.training && !rng) throw ConfigError("decode: training mode needs an rng");
  Rng unused(0);
  auto dr = dropout(c.fused, options.dropout_rate, options.training, rng ? *rng : unused);
  c.dropped = std::move(dr.output);
  c.dropout_scale = std::move(dr.scale);

  Tensor logits({A});
  for (std::size_t a = 0; a < A; ++a) {
    double z = params.out_bias[a];
    for (std::size_t e = 0; e < D; ++e) z += params.out_weight[a * D + e] * c.dropped[a * D + e];
    logits[a] = z;
  }
  return logits;
}

Tensor decode_backward(const DecoderParams& params, const DecoderOptions& options,
                       const DecoderCache& cache, const Tensor& grad_logits,
                       DecoderParams& grads) {
  const Tensor& fa = cache.input;
  const std::size_t A = fa.dim(0), D = fa.dim(1);
  if (grad_logits.shape() != Shape{A}) throw ShapeError("decode_backward: gradient must be A");

  Tensor dw({A, D}), dbias({A}), dfused({A, D});
  for (std::size_t a = 0; a < A; ++a) {
    const double g = grad_logits[a];
    dbias[a] = g;
    for (std::size_t e = 0; e < D; ++e) {
      dw[a * D + e] = g * cache.dropped[a * D + e];
      dfused[a * D + e] = g * params.out_weight[a * D + e] * cache.dropout_scale[a * D + e];
    }
  }
  add_into(grads.out_weight, dw);
  add_into(grads.out_bias, dbias);

  Tensor grad_values({A, D});
  Tensor grad_fa({A, D});
  branch_backward(fa, cache.values, params.positive, options, cache.positive, dfused, grad_values,
                  grads.positive, grad_fa);
  branch_backward(fa, cache.values, params.negative, options, cache.negative, dfused, grad_values,
                  grads.negative, grad_fa);

  const auto vb = matmul_backward(fa, params.value, grad_values);
  add_into(grads.value, vb.b);
  add_into(grad_fa, vb.a);
  return grad_fa;
}

DecoderAttention decoder_attention(const Tensor& fa, const AssociationMasks& masks,
                                   const DecoderParams& params, const DecoderOptions& options) {
  DecoderOptions eval = options;
  eval.training = false;
  DecoderCache cache;
  decode(fa, masks, params, eval, nullptr, &cache);
  return {cache.positive.attention, cache.negative.attention};
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_loss(const Tensor& logits, const Tensor& targets) {
  if (logits.size() != targets.size()) throw ShapeError("bce_loss: logits/targets length differ");
  double total = 0.0;
  for (std::size_t a = 0; a < logits.size(); ++a) {
    const double z = logits[a], y = targets[a];
    if (y != 0.0 && y != 1.0) throw ConfigError("bce_loss: targets must be binary");
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  return total / static_cast<double>(logits.size());
}

Tensor bce_loss_grad(const Tensor& logits, const Tensor& targets) {
  if (logits.size() != targets.size()) throw ShapeError("bce_loss_grad: length mismatch");
  Tensor g(logits.shape());
  const double n = static_cast<double>(logits.size());
  for (std::size_t a = 0; a < logits.size(); ++a) g[a] = (sigmoid(logits[a]) - targets[a]) / n;
  return g;
}

std::vector<std::uint8_t> predict(const Tensor& logits, double threshold) {
  std::vector<std::uint8_t> out(logits.size());
  for (std::size_t a = 0; a < logits.size(); ++a) out[a] = sigmoid(logits[a]) >= threshold;
  return out;
}

}  // namespace triax
