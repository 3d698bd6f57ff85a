// triax: command-line front end.

#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "triax/commands.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "JSON config file");
  cmd->add_option("--seed", c.seed, "overrides the config seed");
  cmd->add_option("--threads", c.threads, "worker threads");
}

triax::RunConfig resolve(const Common& c) {
  triax::RunConfig rc = c.config.empty() ? triax::parse_run_config(nlohmann::json::object())
                                         : triax::load_run_config(c.config);
  if (c.seed) rc.model.seed = *c.seed;
  if (c.threads) rc.model.threads = *c.threads;
  rc.model.validate();
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tri-axial self-attention for concurrent activity recognition"};
  app.require_subcommand(1);

  Common common;
  std::string out, data, params;
  bool force = false, pgm = false, inject_fault = false;
  std::optional<std::size_t> samples, epochs;
  std::size_t sample = 0;

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
  add_common(synth, common);
  synth->add_option("-o,--out", out, "output directory")->required();
  synth->add_option("-n,--samples", samples, "number of samples");
  synth->add_flag("--force", force, "replace a non-empty output directory");

  auto* train = app.add_subcommand("train", "train and evaluate");
  add_common(train, common);
  train->add_option("-o,--out", out, "output directory");
  train->add_option("-d,--data", data, "training dataset directory");
  train->add_option("--epochs", epochs, "overrides the config epoch count");
  train->add_flag("--force", force, "replace a non-empty output directory");

  auto* eval = app.add_subcommand("eval", "score a dataset with saved parameters");
  add_common(eval, common);
  eval->add_option("-p,--params", params, "params file")->required();
  eval->add_option("-d,--data", data, "dataset directory");
  eval->add_option("-o,--out", out, "directory for metrics.json");

  auto* grad = app.add_subcommand("gradcheck", "compare reverse-mode and numerical gradients");
  add_common(grad, common);
  grad->add_flag("--inject-fault", inject_fault, "corrupt one analytic gradient")->group("");

  auto* exp = app.add_subcommand("export", "write attention maps and association masks");
  add_common(exp, common);
  exp->add_option("-p,--params", params, "params file")->required();
  exp->add_option("-d,--data", data, "dataset directory");
  exp->add_option("-s,--sample", sample, "sample index");
  exp->add_option("-o,--out", out, "output directory")->required();
  exp->add_flag("--pgm", pgm, "also write PGM images of the spatial maps");

  auto* macc = app.add_subcommand("macc", "analytic multiply-accumulate counts");
  add_common(macc, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? triax::kExitOk : triax::kExitConfig;
  }

  try {
    if (grad->parsed()) {
      triax::ModelConfig config = triax::gradcheck_config();
      if (!common.config.empty()) config = triax::load_run_config(common.config).model;
      return triax::cmd_gradcheck(config, common.seed.value_or(0), inject_fault, std::cout);
    }
    triax::RunConfig rc = resolve(common);
    if (synth->parsed()) {
      if (samples) rc.synth.samples = *samples;
      triax::cmd_synth(rc, rc.model.seed, out, force, std::cout);
    } else if (train->parsed()) {
      if (!data.empty()) rc.dataset_dir = data;
      if (epochs) rc.model.epochs = *epochs;
      if (!out.empty()) rc.output_dir = out;
      triax::cmd_train(rc, rc.output_dir, force, std::cout);
    } else if (eval->parsed()) {
      triax::cmd_eval(rc, params, data, out, std::cout);
    } else if (exp->parsed()) {
      triax::cmd_export(rc, params, data, sample, out, pgm, std::cout);
    } else if (macc->parsed()) {
      triax::cmd_macc(rc, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return triax::exit_code_for(e);
  }
  return triax::kExitOk;
}
