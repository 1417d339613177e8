#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace fednilm::cli {

void cmd_synth(const RunConfig& cfg);
void cmd_preprocess(const RunConfig& cfg);
void cmd_train_central(const RunConfig& cfg);
void cmd_train_federated(const RunConfig& cfg);
void cmd_serve(const RunConfig& cfg);
void cmd_join(const RunConfig& cfg);
void cmd_evaluate(const RunConfig& cfg);

/// Raw households and their appliance specs, read through the manifest when
/// one exists. Throws DataError listing every missing channel file.
struct RawInput {
  std::vector<HouseholdRaw> households;
  std::vector<ApplianceSpec> specs;
};
RawInput load_raw(const std::filesystem::path& dir, const std::vector<std::string>& appliances);

/// One preprocessed dataset directory (a single split plan).
struct PreparedInput {
  std::filesystem::path dir;
  std::string label;  // "seen" or "case<k>"
  std::vector<std::string> appliance_names;
  std::size_t window_len = 0;
  double mean_w = 0;
  std::vector<HouseholdWindows> households;
};
/// The dataset at `dir`, or each "case<k>" dataset beneath it.
std::vector<PreparedInput> load_prepared(const std::filesystem::path& dir);

}  // namespace fednilm::cli
