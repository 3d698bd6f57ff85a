#include "triax/model.hpp"

#include <fstream>
#include <map>
#include <vector>

#include "triax/tensor_io.hpp"

namespace triax {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("config field '") + name + "' must be >= 1");
  };
  positive(frames, "frames");
  positive(grid_w, "grid_w");
  positive(grid_h, "grid_h");
  positive(channels, "channels");
  positive(clusters, "clusters");
  positive(activities, "activities");
  positive(lr_decay_epochs, "lr_decay_epochs");
  positive(kmeans_iters, "kmeans_iters");
  positive(threads, "threads");
  positive(augment.factor, "augment.factor");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ConfigError("config field 'dropout' must be in [0,1)");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("config field 'threshold' must be in (0,1)");
  if (!(base_lr > 0.0)) throw ConfigError("config field 'base_lr' must be positive");
  if (!(alpha_init > 0.0)) throw ConfigError("config field 'alpha_init' must be positive");
  if (use_clustering && kmeans_max_descriptors < clusters)
    throw ConfigError("config field 'kmeans_max_descriptors' must be >= clusters");
}

namespace {

template <class F>
auto stage(const char* name, F&& f) {
  const std::string prefix = std::string(name) + ": ";
  try {
    return f();
  } catch (const ShapeError& e) {
    throw ShapeError(prefix + e.what());
  } catch (const NumericError& e) {
    throw NumericError(prefix + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  }
}

std::vector<std::pair<std::string, Tensor>> named_tensors(const ModelParams& params) {
  std::vector<std::pair<std::string, Tensor>> out;
  const ModelParams& p = params;
  auto add = [&](const std::string& name, const Tensor& t) {
    if (!t.empty()) out.emplace_back(name, t);
  };
  if (!p.codebook.centroids.empty()) {
    add("codebook.centroids", p.codebook.centroids);
    add("codebook.alpha", Tensor::scalar(p.codebook.alpha));
  }
  add("bank.masks", p.bank.masks);
  for (std::size_t h = 0; h < p.encoder.heads.size(); ++h) {
    const std::string base = "encoder." + std::to_string(h);
    add(base + ".query", p.encoder.heads[h].query);
    add(base + ".key", p.encoder.heads[h].key);
    add(base + ".value", p.encoder.heads[h].value);
  }
  for (auto [label, b] : {std::pair<const char*, const BranchParams*>{"positive", &p.decoder.positive},
                          {"negative", &p.decoder.negative}}) {
    const std::string base = std::string("decoder.") + label;
    add(base + ".w_query", b->w_query);
    add(base + ".w_key", b->w_key);
    add(base + ".bias", b->bias);
  }
  add("decoder.value", p.decoder.value);
  add("decoder.out_weight", p.decoder.out_weight);
  add("decoder.out_bias", p.decoder.out_bias);
  add("masks.positive", p.masks.positive);
  add("masks.negative", p.masks.negative);
  return out;
}

// Zero tensors with the shapes implied by the config.
ModelParams layout(const ModelConfig& config) {
  const std::size_t A = config.activities, F = config.feature_dim();
  const std::size_t d = config.projection_dim(), D = config.decoder_dim();
  ModelParams p;
  if (config.use_clustering)
    p.codebook = {Tensor({config.clusters, config.channels}), config.alpha_init};
  if (config.use_activity_attention) p.bank = {Tensor({A, config.grid_w, config.grid_h})};
  p.encoder.shared = !config.per_activity_projections;
  p.encoder.heads.resize(p.encoder.shared ? 1 : A);
  for (auto& h : p.encoder.heads) h = {Tensor({F, d}), Tensor({F, d}), Tensor({F, d})};
  auto branch = [&] { return BranchParams{Tensor({D, D}), Tensor({D, D}), Tensor({D})}; };
  p.decoder = {branch(), branch(), Tensor({D, D}), Tensor({A, D}), Tensor({A})};
  p.masks = {Tensor({A, A}), Tensor({A, A}, 1.0)};
  return p;
}

}  // namespace

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  z.visit_all([](std::string_view, const std::string&, std::span<double> v) {
    std::fill(v.begin(), v.end(), 0.0);
  });
  return z;
}

void accumulate(ModelParams& dst, const ModelParams& src, double scale) {
  std::vector<std::span<double>> a, b;
  dst.visit_trainable([&](std::string_view, const std::string&, std::span<double> v) { a.push_back(v); });
  const_cast<ModelParams&>(src).visit_trainable(
      [&](std::string_view, const std::string&, std::span<double> v) { b.push_back(v); });
  if (a.size() != b.size()) throw ShapeError("accumulate: parameter layouts differ");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) throw ShapeError("accumulate: parameter sizes differ");
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += scale * b[i][j];
  }
}

std::size_t trainable_count(ModelParams& p) {
  std::size_t n = 0;
  p.visit_trainable([&](std::string_view, const std::string&, std::span<double> v) { n += v.size(); });
  return n;
}

ModelParams init_params(const ModelConfig& config, const Tensor& descriptors, const Tensor& labels,
                        std::uint64_t seed) {
  config.validate();
  if (labels.rank() != 2 || labels.dim(1) != config.activities)
    throw ShapeError("labels must be N x " + std::to_string(config.activities) + ", got " +
                     shape_str(labels.shape()));
  ModelParams p = layout(config);
  if (config.use_clustering)
    p.codebook = kmeans_init(descriptors, config.clusters, seed, config.kmeans_iters,
                             config.alpha_init);
  if (config.use_activity_attention)
    p.bank = ActivityAttentionBank::uniform(config.activities, config.grid_w, config.grid_h);
  Rng rng(seed ^ 0x9E3779B97F4A7C15ULL);
  p.encoder = EncoderParams::random(config.activities, config.feature_dim(),
                                    config.projection_dim(), !config.per_activity_projections, rng);
  p.decoder = DecoderParams::random(config.activities, config.decoder_dim(), rng);
  p.masks = build_assoc_masks(labels);
  return p;
}

Tensor forward(const ModelConfig& config, const ModelParams& params, const Tensor& fm,
               bool training, Rng* rng, ForwardCache* cache) {
  if (fm.rank() != 4 || fm.dim(0) != config.frames || fm.dim(1) != config.grid_w ||
      fm.dim(2) != config.grid_h || fm.dim(3) != config.channels)
    throw ShapeError("input: feature map " + shape_str(fm.shape()) + " does not match config " +
                     shape_str({config.frames, config.grid_w, config.grid_h, config.channels}));
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;

  if (config.use_clustering) {
    c.clustered = stage("clustering", [&] {
      return flatten_clusters(vlad_encode(fm, params.codebook, &c.assignments));
    });
  } else {
    c.clustered = fm;
  }
  c.activity_features = stage("activity_attention", [&] {
    return config.use_activity_attention ? activity_attend(c.clustered, params.bank)
                                         : spatial_mean_broadcast(c.clustered, config.activities);
  });
  c.activity_vectors = stage("encoder", [&] {
    return encode(c.activity_features, params.encoder, config.encoder_options(), &c.encoder).activity;
  });
  Tensor logits = stage("decoder", [&] {
    return decode(c.activity_vectors, params.masks, params.decoder,
                  config.decoder_options(training), rng, &c.decoder);
  });
  if (cache) c.input = fm;
  return logits;
}

void backward(const ModelConfig& config, const ModelParams& params, const ForwardCache& cache,
              const Tensor& grad_logits, ModelParams& grads) {
  const Tensor grad_fa =
      decode_backward(params.decoder, config.decoder_options(true), cache.decoder, grad_logits,
                      grads.decoder);
  const Tensor grad_fm =
      encode_backward(params.encoder, config.encoder_options(), cache.encoder, grad_fa, grads.encoder);

  const bool need_fcf_grad = config.use_clustering;
  Tensor grad_fcf;
  if (config.use_activity_attention) {
    activity_attend_backward(cache.clustered, params.bank, grad_fm, grads.bank.masks,
                             need_fcf_grad ? &grad_fcf : nullptr);
  } else if (need_fcf_grad) {
    grad_fcf = spatial_mean_broadcast_backward(cache.clustered, grad_fm);
  }
  if (need_fcf_grad) {
    CodebookGrad cg{std::move(grads.codebook.centroids), grads.codebook.alpha};
    vlad_encode_backward(cache.input, params.codebook, cache.assignments, grad_fcf, cg);
    grads.codebook.centroids = std::move(cg.centroids);
    grads.codebook.alpha = cg.alpha;
  }
}

double loss_and_grad(const ModelConfig& config, const ModelParams& params, const Tensor& fm,
                     const Tensor& target, bool training, Rng* rng, ModelParams& grads) {
  ForwardCache cache;
  const Tensor logits = forward(config, params, fm, training, rng, &cache);
  const double loss = bce_loss(logits, target);
  backward(config, params, cache, bce_loss_grad(logits, target), grads);
  return loss;
}

Tensor vlad_baseline_logits(const Tensor& fm, const ClusterCodebook& codebook,
                            const Tensor& weights, const Tensor& bias) {
  const Tensor agg = vlad_aggregate(vlad_encode(fm, codebook));
  if (weights.rank() != 2 || weights.dim(1) != agg.size() || bias.size() != weights.dim(0))
    throw ShapeError("baseline scorer must be A x " + std::to_string(agg.size()));
  const std::size_t A = weights.dim(0);
  Tensor logits({A});
  for (std::size_t a = 0; a < A; ++a) {
    double z = bias[a];
    for (std::size_t e = 0; e < agg.size(); ++e) z += weights[a * agg.size() + e] * agg[e];
    logits[a] = z;
  }
  return logits;
}

namespace {
constexpr char kParamsMagic[4] = {'T', 'X', 'P', 'M'};

void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const int c = is.get();
    if (c == EOF) throw IoError("params file truncated");
    v |= static_cast<std::uint32_t>(c & 0xFF) << (8 * i);
  }
  return v;
}
}  // namespace

void save_params(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  const auto entries = named_tensors(params);
  os.write(kParamsMagic, 4);
  put_u32(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tnsr(os, t);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

ModelParams load_params(const std::filesystem::path& path, const ModelConfig& config) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kParamsMagic))
    throw IoError(path.string() + ": not a params file");
  std::map<std::string, Tensor> stored;
  const std::uint32_t count = get_u32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(is);
    if (len > 4096) throw IoError(path.string() + ": bad entry name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw IoError("params file truncated");
    stored[name] = read_tnsr(is);
  }

  ModelParams p = layout(config);
  auto take = [&](const std::string& name, Tensor& dst) {
    if (dst.empty()) return;
    auto it = stored.find(name);
    if (it == stored.end()) throw IoError(path.string() + ": missing tensor '" + name + "'");
    if (it->second.shape() != dst.shape())
      throw IoError(path.string() + ": tensor '" + name + "' has shape " +
                    shape_str(it->second.shape()) + ", config expects " + shape_str(dst.shape()));
    dst = std::move(it->second);
    stored.erase(it);
  };
  if (config.use_clustering) {
    take("codebook.centroids", p.codebook.centroids);
    Tensor alpha = Tensor::scalar(0.0);
    take("codebook.alpha", alpha);
    p.codebook.alpha = alpha[0];
  }
  take("bank.masks", p.bank.masks);
  for (std::size_t h = 0; h < p.encoder.heads.size(); ++h) {
    const std::string base = "encoder." + std::to_string(h);
    take(base + ".query", p.encoder.heads[h].query);
    take(base + ".key", p.encoder.heads[h].key);
    take(base + ".value", p.encoder.heads[h].value);
  }
  for (auto [label, b] : {std::pair<const char*, BranchParams*>{"positive", &p.decoder.positive},
                          {"negative", &p.decoder.negative}}) {
    const std::string base = std::string("decoder.") + label;
    take(base + ".w_query", b->w_query);
    take(base + ".w_key", b->w_key);
    take(base + ".bias", b->bias);
  }
  take("decoder.value", p.decoder.value);
  take("decoder.out_weight", p.decoder.out_weight);
  take("decoder.out_bias", p.decoder.out_bias);
  take("masks.positive", p.masks.positive);
  take("masks.negative", p.masks.negative);
  if (!stored.empty())
    throw IoError(path.string() + ": unexpected tensor '" + stored.begin()->first + "'");
  return p;
}

}  // namespace triax
