#include "triax/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "triax/augment.hpp"
#include "triax/gradcheck.hpp"
#include "triax/macc.hpp"
#include "triax/metrics.hpp"
#include "triax/train.hpp"

namespace triax {

namespace fs = std::filesystem;

namespace {

void prepare_out_dir(const fs::path& out, bool force) {
  if (out.empty()) throw ConfigError("an output directory is required");
  if (fs::exists(out) && !fs::is_directory(out))
    throw ConfigError("output path " + out.string() + " exists and is not a directory");
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!force) throw ConfigError("output directory " + out.string() + " is not empty (use --force)");
    fs::remove_all(out);
  }
  fs::create_directories(out);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
}

Dataset synth_split(const RunConfig& rc, std::size_t samples, std::uint64_t stream) {
  SynthSpec s = rc.synth;
  s.samples = samples;
  return synth_dataset(s, derive_seed(rc.model.seed, stream));
}

// Training data: the dataset dir, or the synthetic training split.
Dataset training_data(const RunConfig& rc) {
  if (!rc.dataset_dir.empty()) return load_dataset(rc.dataset_dir);
  return synth_split(rc, rc.synth.samples, 10);
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  return kExitConfig;
}

void cmd_synth(const RunConfig& rc, std::uint64_t seed, const fs::path& out, bool force,
               std::ostream& log) {
  prepare_out_dir(out, force);
  const Dataset data = synth_dataset(rc.synth, seed);
  save_dataset(out, data);
  write_config_echo(out, rc);
  log << "wrote " << data.size() << " samples of shape " << shape_str(data.features.front().shape())
      << " to " << out.string() << "\n";
}

void cmd_train(const RunConfig& rc, const fs::path& out, bool force, std::ostream& log) {
  prepare_out_dir(out, force);
  write_config_echo(out, rc);
  const ModelConfig& config = rc.model;
  const Dataset train_set = training_data(rc);

  std::string split = "test";
  Dataset eval_set;
  if (!rc.test_dir.empty())
    eval_set = load_dataset(rc.test_dir);
  else if (rc.dataset_dir.empty())
    eval_set = synth_split(rc, rc.test_samples, 11);
  else
    split = "train";

  std::ostringstream csv;
  csv << "epoch,lr,loss\n" << std::setprecision(17);
  const std::size_t every = std::max<std::size_t>(1, config.epochs / 10);
  const TrainResult result = train(config, train_set, [&](const EpochLog& e) {
    csv << e.epoch << "," << e.lr << "," << e.loss << "\n";
    if (e.epoch % every == 0 || e.epoch + 1 == config.epochs)
      log << "epoch " << e.epoch << " lr " << e.lr << " loss " << e.loss << "\n";
  });
  write_text(out / "train_log.csv", csv.str());
  save_params(out / "params.bin", result.params);

  const Metrics m = evaluate(config, result.params, split == "train" ? train_set : eval_set,
                             config.threshold);
  nlohmann::ordered_json j = to_json(m);
  j["split"] = split;
  j["initial_loss"] = result.initial_loss;
  j["final_loss"] = dataset_loss(config, result.params, train_set);
  write_text(out / "metrics.json", j.dump(2) + "\n");
  log << j.dump(2) << "\n";
}

void cmd_eval(const RunConfig& rc, const fs::path& params_path, const fs::path& data,
              const fs::path& out, std::ostream& log) {
  const ModelParams params = load_params(params_path, rc.model);
  Dataset set;
  if (!data.empty())
    set = load_dataset(data);
  else if (!rc.test_dir.empty())
    set = load_dataset(rc.test_dir);
  else
    set = synth_split(rc, rc.test_samples, 11);
  const nlohmann::ordered_json j = to_json(evaluate(rc.model, params, set, rc.model.threshold));
  if (!out.empty()) {
    fs::create_directories(out);
    write_config_echo(out, rc);
    write_text(out / "metrics.json", j.dump(2) + "\n");
  }
  log << j.dump(2) << "\n";
}

ModelConfig gradcheck_config() {
  ModelConfig c;
  c.frames = 4;
  c.grid_w = 2;
  c.grid_h = 2;
  c.channels = 4;
  c.clusters = 2;
  c.activities = 3;
  c.proj_dim = 4;
  c.dropout = 0.0;
  return c;
}

std::vector<GradcheckGroup> run_gradcheck(const ModelConfig& config, std::uint64_t seed,
                                          bool inject_fault) {
  config.validate();
  Rng rng(seed);
  const std::size_t A = config.activities;

  // Random parameters away from the symmetric initial point.
  Tensor labels({12, A});
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = uniform01(rng) < 0.5 ? 1.0 : 0.0;
  Tensor descriptors({4 * config.clusters, config.channels});
  fill_uniform(descriptors, -1.0, 1.0, rng);
  ModelParams params = init_params(config, descriptors, labels, seed);
  if (!params.codebook.centroids.empty()) params.codebook.alpha = 0.7 + uniform01(rng);
  if (!params.bank.masks.empty()) fill_uniform(params.bank.masks, 0.05, 0.5, rng);
  params.visit_trainable([&](std::string_view group, const std::string&, std::span<double> v) {
    if (group == "decoder_align" || group == "decoder_output")
      for (auto& x : v) x = 2.0 * uniform01(rng) - 1.0;
  });

  Tensor fm({config.frames, config.grid_w, config.grid_h, config.channels});
  fill_uniform(fm, -1.0, 1.0, rng);
  Tensor target({A});
  for (std::size_t a = 0; a < A; ++a) target[a] = static_cast<double>(a % 2);

  ModelParams analytic = zeros_like(params);
  loss_and_grad(config, params, fm, target, false, nullptr, analytic);

  std::vector<std::span<double>> grads;
  analytic.visit_trainable(
      [&](std::string_view, const std::string&, std::span<double> g) { grads.push_back(g); });

  std::vector<GradcheckGroup> report;
  std::size_t index = 0;
  params.visit_trainable([&](std::string_view group, const std::string&, std::span<double> v) {
    const std::span<double> g = grads[index++];
    if (inject_fault && group == "encoder_value")
      for (auto& x : g) x *= 1.01;
    const Tensor x0(Shape{v.size()}, std::vector<double>(v.begin(), v.end()));
    auto loss_at = [&](const Tensor& x) {
      std::copy(x.values().begin(), x.values().end(), v.begin());
      const double l = bce_loss(forward(config, params, fm), target);
      std::copy(x0.values().begin(), x0.values().end(), v.begin());
      return l;
    };
    const Tensor numeric = finite_diff_grad(loss_at, x0);
    const double err = max_relative_error(g, numeric.values());
    auto it = std::find_if(report.begin(), report.end(), [&](const auto& r) { return r.group == group; });
    if (it == report.end()) it = report.insert(report.end(), {std::string(group), 0, 0.0});
    it->entries += v.size();
    it->max_rel_error = std::max(it->max_rel_error, err);
  });
  return report;
}

int cmd_gradcheck(const ModelConfig& config, std::uint64_t seed, bool inject_fault, std::ostream& log) {
  const auto report = run_gradcheck(config, seed, inject_fault);
  bool ok = true;
  for (const auto& r : report) {
    const bool pass = r.max_rel_error < kGradcheckTolerance;
    ok = ok && pass;
    log << std::left << std::setw(16) << r.group << " entries " << std::setw(5) << r.entries
        << " max_rel_error " << std::scientific << std::setprecision(3) << r.max_rel_error
        << std::defaultfloat << (pass ? "  PASS" : "  FAIL") << "\n";
  }
  log << (ok ? "gradcheck passed" : "gradcheck FAILED") << " (tolerance " << kGradcheckTolerance << ")\n";
  return ok ? kExitOk : kExitVerification;
}

std::vector<fs::path> cmd_export(const RunConfig& rc, const fs::path& params_path,
                                 const fs::path& data, std::size_t sample, const fs::path& out,
                                 bool with_pgm, std::ostream& log) {
  const ModelConfig& config = rc.model;
  const ModelParams params = load_params(params_path, config);
  const Dataset set = !data.empty() ? load_dataset(data) : synth_split(rc, rc.test_samples, 11);
  if (sample >= set.size())
    throw ConfigError("sample " + std::to_string(sample) + " out of range (dataset has " +
                      std::to_string(set.size()) + ")");
  Tensor fm = set.features[sample];
  if (config.augment.enabled)
    fm = augment_center(fm, {config.augment.factor, config.frames, config.grid_w, config.grid_h});

  ForwardCache cache;
  forward(config, params, fm, false, nullptr, &cache);

  fs::create_directories(out);
  write_config_echo(out, rc);
  std::vector<fs::path> written;
  if (!params.bank.masks.empty()) {
    const auto maps = write_activity_maps(out, export_activity_maps(params.bank, cache.clustered), with_pgm);
    written.insert(written.end(), maps.begin(), maps.end());
  }
  const auto grids = write_temporal_attention(
      out, export_temporal_attention(cache.activity_features, params.encoder, config.encoder_options()));
  written.insert(written.end(), grids.begin(), grids.end());
  write_mask_csv(out / "mask_positive.csv", params.masks.positive);
  write_mask_csv(out / "mask_negative.csv", params.masks.negative);
  written.push_back(out / "mask_positive.csv");
  written.push_back(out / "mask_negative.csv");
  log << "wrote " << written.size() << " files to " << out.string() << "\n";
  return written;
}

void cmd_macc(const RunConfig& rc, std::ostream& log) {
  log << to_json(macc_estimate(rc.model)).dump(2) << "\n";
}

}  // namespace triax
