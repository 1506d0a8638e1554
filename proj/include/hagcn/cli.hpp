#pragma once

#include "hagcn/io.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace hagcn {

enum class Task { node, graph, vae };

std::string to_string(Task task);

/// Settings of one training run. Config files use the keys arch, epochs, lr,
/// dropout, l2, seed, optimizer, gate_variant, batch_size, data, out,
/// encoder_arch, decoder_arch, latent_dim, embed_dim.
struct RunConfig {
  Task task = Task::node;
  std::string arch;
  TrainingConfig training;
  VaeOptions vae;
  std::filesystem::path data;
  std::filesystem::path out;
};

/// Applies the keys present in doc on top of config. Unknown keys are rejected.
void apply_config_json(const nlohmann::json& doc, RunConfig& config);

/// Default architectures per task.
std::string default_arch(Task task);

/// Loads the dataset, trains and writes metrics.csv, summary.json and
/// checkpoint.json into config.out. Returns the summary document.
nlohmann::json run_training(const RunConfig& config, std::ostream& log);

/// Exit codes: 0 success, 1 usage error, 2 runtime failure.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hagcn
