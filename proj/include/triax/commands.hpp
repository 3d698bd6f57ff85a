#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "triax/run_config.hpp"

namespace triax {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitVerification = 2, kExitNumeric = 3 };

/// Maps an exception thrown by a command to its exit code.
int exit_code_for(const std::exception& e);

/// Writes `samples` synthetic clips drawn with `seed` to `out`.
/// Throws ConfigError if `out` exists and is non-empty, unless `force`.
void cmd_synth(const RunConfig& rc, std::uint64_t seed, const std::filesystem::path& out, bool force,
               std::ostream& log);

/// Trains on rc.dataset_dir (or a synthetic set drawn from rc.synth) and
/// writes params.bin, metrics.json, train_log.csv and the config echo. Metrics
/// are computed on rc.test_dir, else a synthetic test set when the training
/// data was synthetic, else the training set.
void cmd_train(const RunConfig& rc, const std::filesystem::path& out, bool force, std::ostream& log);

/// Scores a dataset with saved parameters; writes metrics.json to `out` when
/// non-empty and prints it.
void cmd_eval(const RunConfig& rc, const std::filesystem::path& params,
              const std::filesystem::path& data, const std::filesystem::path& out, std::ostream& log);

struct GradcheckGroup {
  std::string group;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
};

inline constexpr double kGradcheckTolerance = 1e-4;

/// The small config the gradient gate runs on by default.
ModelConfig gradcheck_config();

/// Reverse-mode gradient of bce_loss(forward(.)) against central differences
/// for every trainable tensor, reduced to one entry per parameter group, on
/// random inputs and parameters. Dropout is off. `inject_fault` scales the
/// analytic encoder value gradient by 1.01 to exercise the failure path.
std::vector<GradcheckGroup> run_gradcheck(const ModelConfig& config, std::uint64_t seed,
                                          bool inject_fault = false);

/// Prints one line per group; returns kExitVerification if any group fails.
int cmd_gradcheck(const ModelConfig& config, std::uint64_t seed, bool inject_fault, std::ostream& log);

/// Spatial activity maps, temporal attention grids and association masks for
/// one sample. Returns the paths written (config echo excluded).
std::vector<std::filesystem::path> cmd_export(const RunConfig& rc,
                                              const std::filesystem::path& params,
                                              const std::filesystem::path& data,
                                              std::size_t sample, const std::filesystem::path& out,
                                              bool with_pgm, std::ostream& log);

/// Prints the MACC breakdown as JSON.
void cmd_macc(const RunConfig& rc, std::ostream& log);

}  // namespace triax
