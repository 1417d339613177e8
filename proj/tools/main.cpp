#include <CLI11.hpp>
#include <iostream>
#include <map>

#include "commands.hpp"
#include "fednilm/error.hpp"

using namespace fednilm;
using namespace fednilm::cli;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kData = 3,
  kProtocol = 4,
  kNumeric = 5,
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return kConfig;
    case ErrorKind::kProtocol:
      return kProtocol;
    case ErrorKind::kNumeric:
      return kNumeric;
    case ErrorKind::kData:
    case ErrorKind::kDimension:
    case ErrorKind::kStructural:
    case ErrorKind::kValidation:
      return kData;
    case ErrorKind::kParameter:
      return kConfig;
  }
  return kInternal;
}

struct Verb {
  const char* name;
  const char* help;
  void (*run)(const RunConfig&);
};

const Verb kVerbs[] = {
    {"synth", "generate synthetic raw households", cmd_synth},
    {"preprocess", "turn a raw directory into windowed dataset files", cmd_preprocess},
    {"train-central", "train one model on the pooled training windows", cmd_train_central},
    {"train-federated", "simulate federated training in process", cmd_train_federated},
    {"serve", "run the federation server", cmd_serve},
    {"join", "run one federated client against a server", cmd_join},
    {"evaluate", "score checkpoints on a dataset split", cmd_evaluate},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated appliance-state disaggregation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  // Flag -> schema key shortcuts; applied after the config file, before --set.
  std::map<std::string, std::string> shortcuts;
  const std::vector<std::pair<std::string, std::string>> shortcut_keys{
      {"--raw", "data.raw_dir"},   {"--data", "data.dataset_dir"}, {"--out", "run.out_dir"},
      {"--model", "run.model"},    {"--split", "data.split"},      {"--host", "net.host"},
      {"--port", "net.port"},      {"--client-id", "net.client_id"}, {"--seed", "synth.seed"},
  };

  const Verb* chosen = nullptr;
  for (const Verb& v : kVerbs) {
    CLI::App* sub = app.add_subcommand(v.name, v.help);
    sub->add_option("--config", config_path, "sectioned key = value file (see 'fednilm schema')");
    sub->add_option("--set", overrides, "override one key: section.key=value")->take_all();
    for (const auto& [flag, key] : shortcut_keys) {
      sub->add_option_function<std::string>(
          flag, [&shortcuts, key = key](const std::string& value) { shortcuts[key] = value; },
          "same as --set " + key + "=...");
    }
    sub->callback([&chosen, &v] { chosen = &v; });
  }
  bool schema_requested = false;
  app.add_subcommand("schema", "print every configuration key with its default")->callback([&] {
    schema_requested = true;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (schema_requested) {
    std::cout << format_schema();
    return kOk;
  }
  try {
    RunConfig cfg;
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const auto& [key, value] : shortcuts) set_value(cfg, key, value);
    for (const auto& o : overrides) apply_override(cfg, o);
    chosen->run(cfg);
  } catch (const Error& e) {
    std::cerr << "fednilm " << chosen->name << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "fednilm " << chosen->name << ": " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
