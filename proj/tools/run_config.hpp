#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fednilm/data.hpp"
#include "fednilm/federation.hpp"

namespace fednilm::cli {

/// Everything a command may read. Defaults follow the published parameter
/// table; every field is addressable as "section.key".
struct RunConfig {
  // [data]
  std::string raw_dir;
  std::string dataset_dir;
  SplitMode split = SplitMode::kSeen;
  std::size_t unseen_case = 0;  // 0: every case
  std::vector<std::string> appliances{"fridge", "dishwasher", "washing_machine"};
  std::size_t train_stride = 63;
  std::size_t eval_stride = 126;

  // [model] and [federation]; model.appliance_count follows data.appliances.
  // federation.clients = 0 means one client per training household.
  FederationConfig federation = [] {
    FederationConfig f;
    f.clients = 0;
    return f;
  }();

  // [central]
  std::size_t central_epochs = 100;

  // [run]
  std::string out_dir;
  std::string model_path;
  std::string eval_split = "test";
  std::size_t repetitions = 1;
  std::vector<std::size_t> round_grid;

  // [net]
  std::string host = "127.0.0.1";
  std::uint16_t port = 5757;
  std::uint32_t client_id = 0;
  double registration_timeout_s = 300;

  // [synth]
  SynthOptions synth;

  PreprocessOptions preprocess_options() const;
  /// Federation settings for repetition `rep` (1-based) with `clients` clients.
  FederationConfig federation_for(std::size_t clients, std::size_t rep) const;
};

struct SchemaField {
  std::string key;  // "section.name"
  std::string type;
  std::string doc;
};

const std::vector<SchemaField>& schema();
std::string format_schema();

/// Throws ConfigError naming the key on an unknown key or a bad value.
void set_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_value(const RunConfig& cfg, const std::string& key);

/// Applies every key of a sectioned "key = value" file.
void apply_config_file(RunConfig& cfg, const std::string& path);
/// "section.key=value"
void apply_override(RunConfig& cfg, const std::string& assignment);

}  // namespace fednilm::cli
