#include "triax/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace triax {

namespace {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError("config " + where() + " must be a JSON object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  void size(const char* key, std::size_t& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number_unsigned()) fail(key, "a non-negative integer");
    out = v.get<std::size_t>();
  }
  void u64(const char* key, std::uint64_t& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number_unsigned()) fail(key, "a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  void real(const char* key, double& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_number()) fail(key, "a number");
    out = v.get<double>();
  }
  void flag(const char* key, bool& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_boolean()) fail(key, "true or false");
    out = v.get<bool>();
  }
  void text(const char* key, std::string& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_string()) fail(key, "a string");
    out = v.get<std::string>();
  }
  void reals(const char* key, std::vector<double>& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_array()) fail(key, "an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "an array of numbers");
      out.push_back(e.get<double>());
    }
  }
  void pairs(const char* key, std::vector<std::pair<std::size_t, std::size_t>>& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_array()) fail(key, "an array of [x, y] pairs");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned())
        fail(key, "an array of [x, y] pairs");
      out.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
  }
  void matrix(const char* key, Tensor& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (!v.is_array() || v.empty() || !v[0].is_array() || v[0].empty()) fail(key, "a non-empty 2-D array");
    const std::size_t rows = v.size(), cols = v[0].size();
    out = Tensor({rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
      if (!v[i].is_array() || v[i].size() != cols) fail(key, "a rectangular 2-D array");
      for (std::size_t j = 0; j < cols; ++j) {
        if (!v[i][j].is_number()) fail(key, "a 2-D array of numbers");
        out[i * cols + j] = v[i][j].get<double>();
      }
    }
  }
  const json& object(const char* key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  /// Throws on the first key that was never asked for.
  void reject_unknown() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + where() + key + "'");
  }

 private:
  [[noreturn]] void fail(const char* key, const char* expected) const {
    throw ConfigError("config key '" + where() + key + "' must be " + expected);
  }
  std::string where() const { return prefix_.empty() ? "" : prefix_ + "."; }

  const json& obj_;
  std::string prefix_;
  std::set<std::string, std::less<>> seen_;
};

BranchFusion parse_fusion(const std::string& s) {
  if (s == "average") return BranchFusion::average;
  if (s == "concat") return BranchFusion::concat;
  throw ConfigError("config key 'fusion' must be \"average\" or \"concat\", got \"" + s + "\"");
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  RunConfig rc;
  ModelConfig& m = rc.model;
  Reader r(doc, "");
  r.size("frames", m.frames);
  r.size("grid_w", m.grid_w);
  r.size("grid_h", m.grid_h);
  r.size("channels", m.channels);
  r.size("clusters", m.clusters);
  r.size("activities", m.activities);
  r.size("proj_dim", m.proj_dim);
  r.flag("use_clustering", m.use_clustering);
  r.flag("use_activity_attention", m.use_activity_attention);
  r.flag("per_activity_projections", m.per_activity_projections);
  r.flag("temporal_masks", m.temporal_masks);
  r.flag("association_masks", m.association_masks);
  r.flag("multi_dim_decoder", m.multi_dim_decoder);
  std::string fusion;
  r.text("fusion", fusion);
  if (!fusion.empty()) m.fusion = parse_fusion(fusion);
  r.real("dropout", m.dropout);
  r.real("threshold", m.threshold);
  r.real("base_lr", m.base_lr);
  r.size("lr_decay_epochs", m.lr_decay_epochs);
  r.size("epochs", m.epochs);
  r.size("batch_size", m.batch_size);
  r.u64("seed", m.seed);
  r.real("alpha_init", m.alpha_init);
  r.size("kmeans_iters", m.kmeans_iters);
  r.size("kmeans_max_descriptors", m.kmeans_max_descriptors);
  r.size("threads", m.threads);
  r.text("dataset_dir", rc.dataset_dir);
  r.text("test_dir", rc.test_dir);
  r.text("output_dir", rc.output_dir);

  if (r.has("augment")) {
    Reader a(r.object("augment"), "augment");
    a.flag("enabled", m.augment.enabled);
    a.size("factor", m.augment.factor);
    a.reject_unknown();
  }

  SynthSpec& s = rc.synth;
  s.frames = m.augment.enabled ? m.frames * m.augment.factor : m.frames;
  s.grid_w = m.grid_w;
  s.grid_h = m.grid_h;
  s.channels = m.channels;
  s.activities = m.activities;
  if (r.has("synth")) {
    Reader y(r.object("synth"), "synth");
    y.size("samples", s.samples);
    y.size("test_samples", rc.test_samples);
    y.size("frames", s.frames);
    y.size("grid_w", s.grid_w);
    y.size("grid_h", s.grid_h);
    y.real("noise", s.noise);
    y.u64("signature_seed", s.signature_seed);
    y.reals("rates", s.rates);
    y.reals("amplitude", s.amplitude);
    y.matrix("cooccurrence", s.cooccurrence);
    y.pairs("cells", s.cells);
    y.pairs("windows", s.windows);
    y.reject_unknown();
  }
  r.reject_unknown();

  m.validate();
  s.fill_defaults();
  s.validate();
  return rc;
}

RunConfig parse_run_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig rc = parse_run_config(doc);
  rc.source_text = text;
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str());
}

nlohmann::ordered_json to_json(const RunConfig& rc) {
  const ModelConfig& m = rc.model;
  const SynthSpec& s = rc.synth;
  nlohmann::ordered_json j;
  j["frames"] = m.frames;
  j["grid_w"] = m.grid_w;
  j["grid_h"] = m.grid_h;
  j["channels"] = m.channels;
  j["clusters"] = m.clusters;
  j["activities"] = m.activities;
  j["proj_dim"] = m.proj_dim;
  j["use_clustering"] = m.use_clustering;
  j["use_activity_attention"] = m.use_activity_attention;
  j["per_activity_projections"] = m.per_activity_projections;
  j["temporal_masks"] = m.temporal_masks;
  j["association_masks"] = m.association_masks;
  j["multi_dim_decoder"] = m.multi_dim_decoder;
  j["fusion"] = m.fusion == BranchFusion::average ? "average" : "concat";
  j["dropout"] = m.dropout;
  j["threshold"] = m.threshold;
  j["base_lr"] = m.base_lr;
  j["lr_decay_epochs"] = m.lr_decay_epochs;
  j["epochs"] = m.epochs;
  j["batch_size"] = m.batch_size;
  j["seed"] = m.seed;
  j["alpha_init"] = m.alpha_init;
  j["kmeans_iters"] = m.kmeans_iters;
  j["kmeans_max_descriptors"] = m.kmeans_max_descriptors;
  j["threads"] = m.threads;
  j["augment"] = {{"enabled", m.augment.enabled}, {"factor", m.augment.factor}};
  j["dataset_dir"] = rc.dataset_dir;
  j["test_dir"] = rc.test_dir;
  j["output_dir"] = rc.output_dir;

  nlohmann::ordered_json y;
  y["samples"] = s.samples;
  y["test_samples"] = rc.test_samples;
  y["frames"] = s.frames;
  y["grid_w"] = s.grid_w;
  y["grid_h"] = s.grid_h;
  y["noise"] = s.noise;
  y["signature_seed"] = s.signature_seed;
  y["rates"] = s.rates;
  y["amplitude"] = s.amplitude;
  auto co = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < s.activities; ++i) {
    std::vector<double> row(s.activities);
    for (std::size_t k = 0; k < s.activities; ++k) row[k] = s.cooccurrence[i * s.activities + k];
    co.push_back(row);
  }
  y["cooccurrence"] = co;
  auto pair_list = [](const auto& v) {
    auto out = nlohmann::ordered_json::array();
    for (const auto& [a, b] : v) out.push_back({a, b});
    return out;
  };
  y["cells"] = pair_list(s.cells);
  y["windows"] = pair_list(s.windows);
  j["synth"] = y;
  return j;
}

void write_config_echo(const std::filesystem::path& dir, const RunConfig& rc) {
  std::filesystem::create_directories(dir);
  const std::string resolved = to_json(rc).dump(2) + "\n";
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
  };
  write(dir / "config.json", rc.source_text.empty() ? resolved : rc.source_text);
  write(dir / "resolved_config.json", resolved);
}

}  // namespace triax
