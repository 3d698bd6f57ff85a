#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "triax/config.hpp"
#include "triax/synth.hpp"

namespace triax {

/// Everything a command needs: the model config, the synthetic data spec used
/// when no dataset directory is given, and paths.
///
/// JSON layout: every ModelConfig field as a top-level key of the same name
/// ("fusion" is "average" or "concat"), an "augment" object {enabled, factor},
/// a "synth" object with the SynthSpec fields plus "test_samples", and the
/// path keys "dataset_dir", "test_dir", "output_dir". Synth extents default to
/// the model's. Unknown keys and wrong types throw ConfigError naming the key.
struct RunConfig {
  ModelConfig model;
  SynthSpec synth;
  std::size_t test_samples = 100;
  std::string dataset_dir;
  std::string test_dir;
  std::string output_dir;

  std::string source_text;  // the config document as read, empty when none was given
};

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig parse_run_config_text(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved config, defaults filled in.
nlohmann::ordered_json to_json(const RunConfig& rc);

/// Writes config.json (the source document verbatim, or the resolved config
/// when there was none) and resolved_config.json into `dir`.
void write_config_echo(const std::filesystem::path& dir, const RunConfig& rc);

}  // namespace triax
