#include "triax/encoder.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace triax {

std::string_view to_string(MaskDirection d) {
  switch (d) {
    case MaskDirection::forward:
      return "forward";
    case MaskDirection::backward:
      return "backward";
    case MaskDirection::none:
      return "none";
  }
  return "none";
}

Tensor temporal_mask(std::size_t frames, MaskDirection direction) {
  Tensor m({frames, frames}, 0.0);
  if (direction == MaskDirection::none) return m;
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t u = 0; u < frames; ++u) {
      const bool allowed = direction == MaskDirection::forward ? u <= t : u >= t;
      if (!allowed) m[t * frames + u] = kMaskedScore;
    }
  return m;
}

EncoderParams EncoderParams::random(std::size_t activities, std::size_t features,
                                    std::size_t proj_dim, bool shared, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(features));
  EncoderParams p;
  p.shared = shared;
  const std::size_t n = shared ? 1 : activities;
  for (std::size_t i = 0; i < n; ++i) {
    ProjectionTriple h{Tensor({features, proj_dim}), Tensor({features, proj_dim}),
                       Tensor({features, proj_dim})};
    fill_uniform(h.query, -bound, bound, rng);
    fill_uniform(h.key, -bound, bound, rng);
    fill_uniform(h.value, -bound, bound, rng);
    p.heads.push_back(std::move(h));
  }
  return p;
}

std::vector<MaskDirection> EncoderOptions::directions() const {
  if (temporal_masks) return {MaskDirection::forward, MaskDirection::backward};
  return {MaskDirection::none};
}

std::size_t EncoderOptions::output_dim(std::size_t proj_dim) const {
  return fusion == BranchFusion::concat ? proj_dim * directions().size() : proj_dim;
}

namespace {

// Attention weights over already-projected sequences.
Tensor attention_weights(const Tensor& q, const Tensor& k, MaskDirection direction) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  Tensor scores = matmul(q, transpose(k));
  for (auto& s : scores.data()) s *= scale;
  const Tensor mask = temporal_mask(q.dim(0), direction);
  return softmax_lastdim(scores, &mask);
}

void add_into(Tensor& dst, const Tensor& src) {
  if (dst.shape() != src.shape()) dst = zeros_like(src);
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

Tensor activity_slice(const Tensor& fm, std::size_t a) {
  const std::size_t T = fm.dim(0), A = fm.dim(1), F = fm.dim(2);
  Tensor seq({T, F});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t f = 0; f < F; ++f) seq[t * F + f] = fm[(t * A + a) * F + f];
  return seq;
}

void check_input(const Tensor& fm, const EncoderParams& params) {
  if (fm.rank() != 3)
    throw ShapeError("encoder input must be T x A x F, got " + shape_str(fm.shape()));
  if (params.heads.empty()) throw ShapeError("encoder has no projection heads");
  if (!params.shared && params.heads.size() != fm.dim(1))
    throw ShapeError("encoder has " + std::to_string(params.heads.size()) +
                     " heads for " + std::to_string(fm.dim(1)) + " activities");
  if (params.heads.front().query.dim(0) != fm.dim(2))
    throw ShapeError("encoder projections expect F=" +
                     std::to_string(params.heads.front().query.dim(0)) + ", input has " +
                     std::to_string(fm.dim(2)));
}

}  // namespace

AttendResult scaled_dot_attend(const Tensor& seq, const ProjectionTriple& proj,
                               MaskDirection direction) {
  const Tensor q = matmul(seq, proj.query);
  const Tensor k = matmul(seq, proj.key);
  const Tensor v = matmul(seq, proj.value);
  Tensor attn = attention_weights(q, k, direction);
  Tensor out = matmul(attn, v);
  return {std::move(out), std::move(attn)};
}

EncoderOutput encode(const Tensor& fm, const EncoderParams& params, const EncoderOptions& options,
                     EncoderCache* cache) {
  check_input(fm, params);
  const std::size_t T = fm.dim(0), A = fm.dim(1);
  const std::size_t d = params.heads.front().value.dim(1);
  const auto dirs = options.directions();
  const std::size_t out_dim = options.output_dim(d);
  const double weight = options.fusion == BranchFusion::average ? 1.0 / dirs.size() : 1.0;

  EncoderOutput result{Tensor({T, A, out_dim}), Tensor({A, out_dim})};
  if (cache) cache->heads.assign(A, {});

  for (std::size_t a = 0; a < A; ++a) {
    const ProjectionTriple& proj = params.head(a);
    Tensor seq = activity_slice(fm, a);
    Tensor q = matmul(seq, proj.query);
    Tensor k = matmul(seq, proj.key);
    Tensor v = matmul(seq, proj.value);

    std::vector<Tensor> attns;
    for (std::size_t b = 0; b < dirs.size(); ++b) {
      Tensor attn = attention_weights(q, k, dirs[b]);
      const Tensor out = matmul(attn, v);
      const std::size_t col0 = options.fusion == BranchFusion::concat ? b * d : 0;
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < d; ++j)
          result.per_frame[(t * A + a) * out_dim + col0 + j] += weight * out[t * d + j];
      attns.push_back(std::move(attn));
    }
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < out_dim; ++j)
        result.activity[a * out_dim + j] += result.per_frame[(t * A + a) * out_dim + j];

    if (cache)
      cache->heads[a] = {std::move(seq), std::move(q), std::move(k), std::move(v),
                         std::move(attns)};
  }
  return result;
}

Tensor encode_backward(const EncoderParams& params, const EncoderOptions& options,
                       const EncoderCache& cache, const Tensor& grad_activity,
                       EncoderParams& grads) {
  const std::size_t A = cache.heads.size();
  if (A == 0) throw ShapeError("encode_backward: empty cache");
  const std::size_t T = cache.heads.front().input.dim(0);
  const std::size_t F = cache.heads.front().input.dim(1);
  const std::size_t d = params.heads.front().value.dim(1);
  const auto dirs = options.directions();
  const std::size_t out_dim = options.output_dim(d);
  if (grad_activity.shape() != Shape{A, out_dim})
    throw ShapeError("encode_backward: gradient " + shape_str(grad_activity.shape()) +
                     ", expected " + shape_str({A, out_dim}));
  if (grads.heads.size() != params.heads.size()) grads.heads.resize(params.heads.size());
  grads.shared = params.shared;

  const double weight = options.fusion == BranchFusion::average ? 1.0 / dirs.size() : 1.0;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor grad_fm({T, A, F});

  for (std::size_t a = 0; a < A; ++a) {
    const auto& h = cache.heads[a];
    Tensor dq({T, d}), dk({T, d}), dv({T, d});
    for (std::size_t b = 0; b < dirs.size(); ++b) {
      const std::size_t col0 = options.fusion == BranchFusion::concat ? b * d : 0;
      // F_A is a sum over frames, so every frame receives the same gradient.
      Tensor dout({T, d});
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < d; ++j)
          dout[t * d + j] = weight * grad_activity[a * out_dim + col0 + j];

      const Tensor& attn = h.attention[b];
      const auto pv = matmul_backward(attn, h.value, dout);
      add_into(dv, pv.b);
      Tensor dscores = softmax_lastdim_backward(attn, pv.a);
      for (auto& s : dscores.data()) s *= scale;
      add_into(dq, matmul(dscores, h.key));
      add_into(dk, matmul(transpose(dscores), h.query));
    }

    const ProjectionTriple& proj = params.head(a);
    ProjectionTriple& g = grads.head(a);
    const Tensor xt = transpose(h.input);
    add_into(g.query, matmul(xt, dq));
    add_into(g.key, matmul(xt, dk));
    add_into(g.value, matmul(xt, dv));

    Tensor dx = matmul(dq, transpose(proj.query));
    add_into(dx, matmul(dk, transpose(proj.key)));
    add_into(dx, matmul(dv, transpose(proj.value)));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < F; ++f) grad_fm[(t * A + a) * F + f] = dx[t * F + f];
  }
  return grad_fm;
}

std::vector<TemporalAttentionGrid> export_temporal_attention(const Tensor& fm,
                                                             const EncoderParams& params,
                                                             const EncoderOptions& options) {
  EncoderCache cache;
  encode(fm, params, options, &cache);
  const auto dirs = options.directions();
  std::vector<TemporalAttentionGrid> grids;
  for (std::size_t a = 0; a < cache.heads.size(); ++a)
    for (std::size_t b = 0; b < dirs.size(); ++b)
      grids.push_back({a, dirs[b], cache.heads[a].attention[b]});
  return grids;
}

std::vector<std::filesystem::path> write_temporal_attention(
    const std::filesystem::path& dir, const std::vector<TemporalAttentionGrid>& grids) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& g : grids) {
    const auto path = dir / ("temporal_a" + std::to_string(g.activity) + "_" +
                             std::string(to_string(g.direction)) + ".csv");
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << std::setprecision(17);
    const std::size_t T = g.attention.dim(0);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t u = 0; u < T; ++u) os << (u ? "," : "") << g.attention[t * T + u];
      os << '\n';
    }
    written.push_back(path);
  }
  return written;
}

}  // namespace triax
