#include "commands.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <set>

#include "fednilm/bytes.hpp"
#include "fednilm/checkpoint.hpp"
#include "fednilm/error.hpp"
#include "fednilm/log.hpp"
#include "fednilm/wire.hpp"

namespace fednilm::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kManifest = "manifest.json";
constexpr const char* kDatasetMeta = "dataset.json";
constexpr const char* kCheckpoint = "model.fnck";
constexpr const char* kPortions[] = {"train", "validation", "test"};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

fs::path require_dir(const std::string& value, const std::string& key) {
  if (value.empty()) throw ConfigError(key + " is required for this command");
  return fs::path(value);
}

fs::path make_out_dir(const RunConfig& cfg) {
  const fs::path out = require_dir(cfg.out_dir, "run.out_dir");
  fs::create_directories(out);
  return out;
}

json spec_json(const ApplianceSpec& s) {
  return {{"name", s.name},
          {"max_power_w", s.max_power_w},
          {"power_threshold_w", s.power_threshold_w},
          {"min_on_s", s.min_on_s},
          {"min_off_s", s.min_off_s}};
}

ApplianceSpec spec_from_json(const json& j) {
  ApplianceSpec s;
  try {
    s.name = j.at("name").get<std::string>();
    s.max_power_w = j.at("max_power_w").get<double>();
    s.power_threshold_w = j.at("power_threshold_w").get<double>();
    s.min_on_s = j.at("min_on_s").get<double>();
    s.min_off_s = j.at("min_off_s").get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("appliance entry: ") + e.what());
  }
  s.validate();
  return s;
}

json config_json(const RunConfig& cfg) {
  json j = json::object();
  // The output location is where this record lives, not an input.
  for (const auto& f : schema()) {
    if (f.key != "run.out_dir") j[f.key] = get_value(cfg, f.key);
  }
  return j;
}

std::string portion_file(std::uint32_t household, const std::string& portion) {
  return fmt::format("house_{}.{}.fnlw", household, portion);
}

std::vector<WindowSample> pooled(const PreparedInput& in, const std::string& portion) {
  std::vector<WindowSample> out;
  for (const auto& h : in.households) {
    const auto& src = portion == "train" ? h.train : portion == "validation" ? h.validation : h.test;
    out.insert(out.end(), src.begin(), src.end());
  }
  return out;
}

std::string csv_scores_header(const std::vector<std::string>& names) {
  std::string h;
  for (const auto& n : names) h += fmt::format(",{0}_accuracy,{0}_precision,{0}_recall,{0}_f1", n);
  return h;
}

std::string csv_scores(const std::vector<ScoreSet>& s) {
  std::string out;
  for (const auto& x : s) out += fmt::format(",{},{},{},{}", x.accuracy, x.precision, x.recall, x.f1);
  return out;
}

void write_prepared(const fs::path& dir, const PreparedDataset& ds, std::span<const ApplianceSpec> specs,
                    const RunConfig& cfg, const fs::path& raw_dir) {
  fs::create_directories(dir);
  json meta;
  meta["format"] = "fednilm-dataset";
  meta["version"] = 1;
  meta["raw_dir"] = raw_dir.string();
  meta["appliances"] = json::array();
  for (const auto& s : specs) meta["appliances"].push_back(spec_json(s));
  meta["window_len"] = ds.window_len;
  meta["train_stride"] = cfg.train_stride;
  meta["eval_stride"] = cfg.eval_stride;
  meta["split"] = to_string(ds.plan.mode);
  meta["unseen_case"] = ds.plan.unseen_case;
  meta["mean_w"] = ds.report.mean_w;
  meta["households"] = json::array();
  for (std::size_t i = 0; i < ds.households.size(); ++i) {
    const auto& hw = ds.households[i];
    const auto& split = ds.plan.households.at(i);
    json h;
    h["id"] = hw.household_id;
    h["samples"] = ds.report.samples.at(hw.household_id);
    h["clipped"] = ds.report.clipped.at(hw.household_id);
    h["empty_bins_filled"] = ds.report.empty_bins_filled.at(hw.household_id);
    const IndexRange* ranges[] = {&split.train, &split.validation, &split.test};
    const std::vector<WindowSample>* portions[] = {&hw.train, &hw.validation, &hw.test};
    for (int p = 0; p < 3; ++p) {
      const std::string file = portion_file(hw.household_id, kPortions[p]);
      write_dataset((dir / file).string(), WindowDataset{ds.appliance_names, ds.window_len, *portions[p]});
      h[kPortions[p]] = {{"begin", ranges[p]->begin},
                         {"end", ranges[p]->end},
                         {"windows", portions[p]->size()},
                         {"file", file}};
    }
    meta["households"].push_back(h);
  }
  write_text(dir / kDatasetMeta, meta.dump(2) + "\n");
}

PreparedInput read_prepared(const fs::path& dir, std::string label) {
  const json meta = read_json(dir / kDatasetMeta);
  PreparedInput in;
  in.dir = dir;
  in.label = std::move(label);
  try {
    for (const auto& a : meta.at("appliances")) in.appliance_names.push_back(a.at("name").get<std::string>());
    in.window_len = meta.at("window_len").get<std::size_t>();
    in.mean_w = meta.at("mean_w").get<double>();
    for (const auto& h : meta.at("households")) {
      HouseholdWindows hw;
      hw.household_id = h.at("id").get<std::uint32_t>();
      std::vector<WindowSample>* portions[] = {&hw.train, &hw.validation, &hw.test};
      for (int p = 0; p < 3; ++p) {
        const auto file = dir / h.at(kPortions[p]).at("file").get<std::string>();
        WindowDataset ds = read_dataset(file.string());
        if (ds.appliance_names != in.appliance_names || ds.window_len != in.window_len) {
          throw DataError(file.string() + " disagrees with " + (dir / kDatasetMeta).string());
        }
        *portions[p] = std::move(ds.samples);
      }
      in.households.push_back(std::move(hw));
    }
  } catch (const json::exception& e) {
    throw DataError((dir / kDatasetMeta).string() + ": " + e.what());
  }
  return in;
}

struct RunOutput {
  std::string split_label;
  std::string run_label;
  std::vector<ScoreRow> test_rows;
};

// Shared logging of a finished (or in-progress) training run.
class RunRecorder {
 public:
  RunRecorder(fs::path dir, const PreparedInput* data, std::vector<std::string> names,
              std::vector<std::size_t> grid)
      : dir_(std::move(dir)), data_(data), names_(std::move(names)), grid_(std::move(grid)) {
    fs::create_directories(dir_);
    if (data_) test_ = pooled(*data_, "test");
  }

  TrainingOptions options(const FederationConfig& config, std::span<const WindowSample> validation) {
    TrainingOptions o;
    o.validation = validation;
    evaluator_ = std::make_unique<NilmModel<float>>(config.initial_model());
    o.on_round = [this](const RoundReport& r, const ParamVector<float>& params) {
      if (!std::binary_search(grid_.begin(), grid_.end(), r.round)) return;
      if (test_.empty()) throw DataError("run.round_grid needs a non-empty test split");
      evaluator_->load_params(params);
      sweep_.push_back({r.round, r.elapsed_seconds, score_windows(*evaluator_, test_)});
    };
    return o;
  }

  RunOutput finish(const TrainingResult& result, const FederationConfig& config, const RunConfig& cfg,
                   const std::string& command, const std::string& split_label, std::size_t rep) {
    save_checkpoint((dir_ / kCheckpoint).string(),
                    Checkpoint{config.initial_model(), result.params, data_ ? data_->mean_w : 0.0});

    std::string rounds = "round,client,loss,batches,bytes_sent,bytes_received,excluded\n";
    std::string times = "round,train_seconds,aggregation_seconds,elapsed_seconds\n";
    std::string validation = "round" + csv_scores_header(names_) + "\n";
    bool any_validation = false;
    for (const auto& r : result.rounds) {
      for (const auto& c : r.clients) {
        rounds += fmt::format("{},{},{},{},{},{},{}\n", r.round, c.client_id, c.loss, c.batches, c.bytes_sent,
                              c.bytes_received, c.excluded ? 1 : 0);
      }
      times += fmt::format("{},{:.6f},{:.6f},{:.6f}\n", r.round, r.train_seconds, r.aggregation_seconds,
                           r.elapsed_seconds);
      if (r.validation) {
        any_validation = true;
        validation += fmt::format("{}{}\n", r.round, csv_scores(*r.validation));
      }
    }
    write_text(dir_ / "rounds.csv", rounds);
    write_text(dir_ / "time_log.csv", times);
    if (any_validation) write_text(dir_ / "validation.csv", validation);

    if (!sweep_.empty()) {
      std::string sweep = "rounds,mean_f1" + csv_scores_header(names_) + "\n";
      std::string sweep_time = "rounds,elapsed_seconds\n";
      for (const auto& s : sweep_) {
        double mean_f1 = 0;
        for (const auto& x : s.scores) mean_f1 += x.f1;
        mean_f1 /= static_cast<double>(s.scores.size());
        sweep += fmt::format("{},{}{}\n", s.round, mean_f1, csv_scores(s.scores));
        sweep_time += fmt::format("{},{:.6f}\n", s.round, s.elapsed);
      }
      write_text(dir_ / "sweep.csv", sweep);
      write_text(dir_ / "sweep_time.csv", sweep_time);
    }

    RunOutput out{split_label, fmt::format("rep{}", rep), {}};
    if (!test_.empty()) {
      NilmModel<float> model(config.initial_model());
      model.load_params(result.params);
      const auto counts = evaluate_windows(model, test_);
      for (std::size_t a = 0; a < counts.size(); ++a) {
        out.test_rows.push_back({names_.at(a), out.run_label, split_label, counts[a], scores(counts[a])});
      }
      write_score_report((dir_ / "test_report.csv").string(), out.test_rows);
    }

    json prov;
    prov["tool"] = "fednilm";
    prov["version"] = kVersion;
    prov["command"] = command;
    prov["split"] = split_label;
    prov["repetition"] = rep;
    prov["config"] = config_json(cfg);
    prov["effective"] = {{"clients", config.clients},
                         {"global_seed", config.global_seed},
                         {"client_seeds", json::array()},
                         {"config_hash", fmt::format("{:016x}", config.hash())},
                         {"param_count", result.params.size()}};
    for (std::size_t n = 0; n < config.clients; ++n) prov["effective"]["client_seeds"].push_back(config.client_seed(n));
    if (data_) prov["dataset"] = {{"dir", data_->dir.string()}, {"mean_w", data_->mean_w}};
    write_text(dir_ / "provenance.json", prov.dump(2) + "\n");
    return out;
  }

 private:
  struct SweepPoint {
    std::size_t round;
    double elapsed;
    std::vector<ScoreSet> scores;
  };
  fs::path dir_;
  const PreparedInput* data_;
  std::vector<std::string> names_;
  std::vector<std::size_t> grid_;
  std::vector<WindowSample> test_;
  std::unique_ptr<NilmModel<float>> evaluator_;
  std::vector<SweepPoint> sweep_;
};

std::vector<std::size_t> sorted_grid(const RunConfig& cfg, std::size_t limit, const std::string& what) {
  std::vector<std::size_t> g = cfg.round_grid;
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  if (!g.empty() && g.back() > limit) {
    throw ConfigError("run.round_grid asks for " + what + " " + std::to_string(g.back()) + " but only " +
                      std::to_string(limit) + " are run");
  }
  return g;
}

void check_appliances(const RunConfig& cfg, const PreparedInput& in) {
  if (in.appliance_names != cfg.appliances) {
    throw ConfigError("data.appliances does not match the dataset at " + in.dir.string());
  }
  if (in.window_len != cfg.federation.model.window_len) {
    throw ConfigError("model.window_len does not match the dataset at " + in.dir.string());
  }
}

void print_rows(const std::vector<ScoreRow>& rows) {
  for (const auto& r : rows) {
    std::cout << fmt::format("{:<16} {:<6} {:<6} acc {:.4f}  prec {:.4f}  rec {:.4f}  f1 {:.4f}\n", r.appliance,
                             r.split, r.run, r.scores.accuracy, r.scores.precision, r.scores.recall, r.scores.f1);
  }
}

void train(const RunConfig& cfg, bool federated) {
  const auto inputs = load_prepared(require_dir(cfg.dataset_dir, "data.dataset_dir"));
  const fs::path out = make_out_dir(cfg);
  if (cfg.repetitions == 0) throw ConfigError("run.repetitions must be positive");
  std::vector<ScoreRow> all_rows;
  for (const auto& in : inputs) {
    check_appliances(cfg, in);
    std::vector<std::vector<WindowSample>> client_data;
    for (const auto& h : in.households) {
      if (!h.train.empty()) client_data.push_back(h.train);
    }
    if (client_data.empty()) throw DataError(in.dir.string() + " has no training windows");
    const auto validation = pooled(in, "validation");
    for (std::size_t rep = 1; rep <= cfg.repetitions; ++rep) {
      const fs::path run_dir = out / in.label / fmt::format("rep{}", rep);
      TrainingResult result;
      FederationConfig config;
      RunOutput ro;
      if (federated) {
        const std::size_t n = cfg.federation.clients == 0 ? client_data.size() : cfg.federation.clients;
        if (n != client_data.size()) {
          throw ConfigError(fmt::format("federation.clients = {} but {} has {} training households", n,
                                        in.dir.string(), client_data.size()));
        }
        config = cfg.federation_for(n, rep);
        RunRecorder rec(run_dir, &in, cfg.appliances, sorted_grid(cfg, config.global_rounds, "round"));
        logger().info("{} rep {}: federated training with {} clients", in.label, rep, n);
        result = run_federated(config, client_data, rec.options(config, validation));
        ro = rec.finish(result, config, cfg, "train-federated", in.label, rep);
      } else {
        config = cfg.federation_for(1, rep);
        std::vector<WindowSample> all;
        for (const auto& d : client_data) all.insert(all.end(), d.begin(), d.end());
        RunRecorder rec(run_dir, &in, cfg.appliances, sorted_grid(cfg, cfg.central_epochs, "epoch"));
        logger().info("{} rep {}: centralized training on {} windows", in.label, rep, all.size());
        result = run_centralized(config, std::move(all), cfg.central_epochs, rec.options(config, validation));
        ro = rec.finish(result, config, cfg, "train-central", in.label, rep);
      }
      print_rows(ro.test_rows);
      all_rows.insert(all_rows.end(), ro.test_rows.begin(), ro.test_rows.end());
    }
  }
  if (!all_rows.empty()) write_score_report((out / "summary.csv").string(), all_rows);
}

}  // namespace

RawInput load_raw(const fs::path& dir, const std::vector<std::string>& appliances) {
  if (!fs::is_directory(dir)) throw DataError("raw directory " + dir.string() + " does not exist");
  RawInput in;
  std::map<std::string, std::string> channel_of;
  std::map<std::string, ApplianceSpec> manifest_specs;
  std::string aggregate_channel = "aggregate";
  std::vector<std::uint32_t> ids;
  const fs::path manifest = dir / kManifest;
  if (fs::exists(manifest)) {
    const json m = read_json(manifest);
    try {
      aggregate_channel = m.value("aggregate_channel", aggregate_channel);
      for (const auto& a : m.at("appliances")) {
        const ApplianceSpec s = spec_from_json(a);
        manifest_specs[s.name] = s;
        channel_of[s.name] = a.value("channel", s.name);
      }
      if (m.contains("households")) ids = m.at("households").get<std::vector<std::uint32_t>>();
    } catch (const json::exception& e) {
      throw DataError(manifest.string() + ": " + e.what());
    }
  }
  if (ids.empty()) {
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (!e.is_directory() || name.rfind("house_", 0) != 0) continue;
      try {
        ids.push_back(static_cast<std::uint32_t>(std::stoul(name.substr(6))));
      } catch (const std::exception&) {
        throw DataError("cannot read a household number from " + (dir / name).string());
      }
    }
    std::sort(ids.begin(), ids.end());
  }
  if (ids.empty()) throw DataError(dir.string() + " holds no house_<n> directories");
  for (const auto& a : appliances) {
    auto it = manifest_specs.find(a);
    if (it != manifest_specs.end()) {
      in.specs.push_back(it->second);
    } else if (!manifest_specs.empty()) {
      throw DataError(manifest.string() + " lists no appliance named '" + a + "'");
    } else {
      in.specs.push_back(spec_for(a));
      in.specs.back().name = a;
    }
  }

  std::vector<std::string> missing;
  auto channel_path = [&](std::uint32_t id, const std::string& channel) {
    return dir / fmt::format("house_{}", id) / (channel + ".dat");
  };
  for (std::uint32_t id : ids) {
    if (!fs::exists(channel_path(id, aggregate_channel))) missing.push_back(channel_path(id, aggregate_channel).string());
    for (const auto& s : in.specs) {
      const std::string ch = channel_of.count(s.name) ? channel_of[s.name] : s.name;
      if (!fs::exists(channel_path(id, ch))) missing.push_back(channel_path(id, ch).string());
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += "\n  " + m;
    throw DataError("missing channel files:" + list);
  }
  for (std::uint32_t id : ids) {
    HouseholdRaw h;
    h.household_id = id;
    const std::string source = fmt::format("house_{}", id);
    h.aggregate = load_series(channel_path(id, aggregate_channel).string(), source, "aggregate");
    for (const auto& s : in.specs) {
      const std::string ch = channel_of.count(s.name) ? channel_of[s.name] : s.name;
      h.appliances.push_back(load_series(channel_path(id, ch).string(), source, s.name));
    }
    in.households.push_back(std::move(h));
  }
  return in;
}

std::vector<PreparedInput> load_prepared(const fs::path& dir) {
  if (fs::exists(dir / kDatasetMeta)) {
    const json meta = read_json(dir / kDatasetMeta);
    const std::string split = meta.value("split", std::string("seen"));
    const std::size_t k = meta.value("unseen_case", std::size_t{0});
    return {read_prepared(dir, split == "seen" ? "seen" : fmt::format("case{}", k))};
  }
  std::vector<std::pair<std::size_t, fs::path>> cases;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (e.is_directory() && name.rfind("case", 0) == 0 && fs::exists(e.path() / kDatasetMeta)) {
        cases.emplace_back(std::stoul(name.substr(4)), e.path());
      }
    }
  }
  if (cases.empty()) throw DataError("no " + std::string(kDatasetMeta) + " under " + dir.string());
  std::sort(cases.begin(), cases.end());
  std::vector<PreparedInput> out;
  for (const auto& [k, p] : cases) out.push_back(read_prepared(p, fmt::format("case{}", k)));
  return out;
}

void cmd_synth(const RunConfig& cfg) {
  const fs::path out = make_out_dir(cfg);
  SynthOptions o = cfg.synth;
  o.appliances = cfg.appliances;
  const auto households = synth_households(o);
  json manifest;
  manifest["format"] = "fednilm-raw";
  manifest["version"] = 1;
  manifest["aggregate_channel"] = "aggregate";
  manifest["households"] = json::array();
  manifest["appliances"] = json::array();
  for (const auto& a : o.appliances) {
    json s = spec_json(spec_for(a));
    s["name"] = a;
    s["channel"] = a;
    manifest["appliances"].push_back(s);
  }
  manifest["generator"] = {{"seed", o.seed},
                           {"days", o.days},
                           {"noise_sigma_w", o.noise_sigma_w},
                           {"start_time", o.start_time}};
  for (const auto& h : households) {
    const fs::path hd = out / fmt::format("house_{}", h.raw.household_id);
    fs::create_directories(hd);
    write_series((hd / "aggregate.dat").string(), h.raw.aggregate);
    for (std::size_t a = 0; a < h.raw.appliances.size(); ++a) {
      write_series((hd / (o.appliances[a] + ".dat")).string(), h.raw.appliances[a]);
    }
    manifest["households"].push_back(h.raw.household_id);
  }
  write_text(out / kManifest, manifest.dump(2) + "\n");
  std::cout << fmt::format("wrote {} households to {}\n", households.size(), out.string());
}

void cmd_preprocess(const RunConfig& cfg) {
  const fs::path raw_dir = require_dir(cfg.raw_dir, "data.raw_dir");
  const fs::path out = make_out_dir(cfg);
  const RawInput raw = load_raw(raw_dir, cfg.appliances);
  std::vector<std::size_t> cases{cfg.unseen_case};
  if (cfg.split == SplitMode::kUnseen && cfg.unseen_case == 0) {
    cases.clear();
    for (std::size_t k = 1; k <= raw.households.size(); ++k) cases.push_back(k);
  }
  for (std::size_t k : cases) {
    PreprocessOptions po = cfg.preprocess_options();
    po.unseen_case = k;
    const PreparedDataset ds = preprocess(raw.households, raw.specs, po);
    const fs::path dir = cfg.split == SplitMode::kSeen ? out : out / fmt::format("case{}", k);
    write_prepared(dir, ds, raw.specs, cfg, raw_dir);
    std::size_t windows[3] = {0, 0, 0};
    for (const auto& h : ds.households) {
      windows[0] += h.train.size();
      windows[1] += h.validation.size();
      windows[2] += h.test.size();
    }
    std::cout << fmt::format("{}: mean {:.3f} W, windows train {} / validation {} / test {}\n", dir.string(),
                             ds.report.mean_w, windows[0], windows[1], windows[2]);
  }
}

void cmd_train_central(const RunConfig& cfg) { train(cfg, false); }
void cmd_train_federated(const RunConfig& cfg) { train(cfg, true); }

void cmd_serve(const RunConfig& cfg) {
  if (cfg.federation.clients == 0) throw ConfigError("serve needs an explicit federation.clients");
  const FederationConfig config = cfg.federation_for(cfg.federation.clients, 1);
  std::optional<PreparedInput> data;
  std::vector<WindowSample> validation;
  if (!cfg.dataset_dir.empty()) {
    auto inputs = load_prepared(cfg.dataset_dir);
    if (inputs.size() != 1) throw ConfigError("serve takes a single dataset, not every unseen case");
    data = std::move(inputs.front());
    check_appliances(cfg, *data);
    validation = pooled(*data, "validation");
  }
  const fs::path out = make_out_dir(cfg);
  RunRecorder rec(out, data ? &*data : nullptr, cfg.appliances, sorted_grid(cfg, config.global_rounds, "round"));
  wire::ServeOptions so;
  so.host = cfg.host;
  so.port = cfg.port;
  so.registration_timeout = std::chrono::milliseconds(static_cast<long long>(cfg.registration_timeout_s * 1000));
  so.on_listening = [](std::uint16_t port) {
    std::cout << "listening on port " << port << std::endl;
  };
  so.training = rec.options(config, validation);
  const TrainingResult result = wire::serve(config, so);
  const RunOutput ro = rec.finish(result, config, cfg, "serve", data ? data->label : "none", 1);
  print_rows(ro.test_rows);
}

void cmd_join(const RunConfig& cfg) {
  if (cfg.federation.clients == 0) throw ConfigError("join needs an explicit federation.clients");
  const FederationConfig config = cfg.federation_for(cfg.federation.clients, 1);
  auto inputs = load_prepared(require_dir(cfg.dataset_dir, "data.dataset_dir"));
  if (inputs.size() != 1) throw ConfigError("join takes a single dataset, not every unseen case");
  check_appliances(cfg, inputs.front());
  std::vector<const HouseholdWindows*> trainers;
  for (const auto& h : inputs.front().households) {
    if (!h.train.empty()) trainers.push_back(&h);
  }
  if (cfg.client_id >= trainers.size()) {
    throw ConfigError(fmt::format("net.client_id {} but the dataset has {} training households", cfg.client_id,
                                  trainers.size()));
  }
  const HouseholdWindows& mine = *trainers[cfg.client_id];
  logger().info("client {} trains on household {} ({} windows)", cfg.client_id, mine.household_id,
                mine.train.size());
  wire::JoinOptions jo;
  jo.host = cfg.host;
  jo.port = cfg.port;
  const auto result = wire::join(config, cfg.client_id,
                                 std::make_shared<const std::vector<WindowSample>>(mine.train), jo);
  std::string curve = "round,loss\n";
  for (std::size_t r = 0; r < result.losses.size(); ++r) curve += fmt::format("{},{}\n", r + 1, result.losses[r]);
  if (!cfg.out_dir.empty()) write_text(make_out_dir(cfg) / fmt::format("client{}_rounds.csv", cfg.client_id), curve);
  std::cout << curve;
}

void cmd_evaluate(const RunConfig& cfg) {
  const fs::path model_path = require_dir(cfg.model_path, "run.model");
  const fs::path data_root = require_dir(cfg.dataset_dir, "data.dataset_dir");
  std::vector<fs::path> checkpoints;
  if (fs::is_directory(model_path)) {
    for (const auto& e : fs::recursive_directory_iterator(model_path)) {
      if (e.is_regular_file() && e.path().filename() == kCheckpoint) checkpoints.push_back(e.path());
    }
    std::sort(checkpoints.begin(), checkpoints.end());
  } else {
    checkpoints.push_back(model_path);
  }
  if (checkpoints.empty()) throw DataError("no " + std::string(kCheckpoint) + " under " + model_path.string());

  const auto inputs = load_prepared(data_root);
  std::vector<ScoreRow> rows;
  std::set<std::string> cases_seen;
  for (const auto& ck_path : checkpoints) {
    // Training output nests checkpoints as <split>/<rep>/model.fnck.
    const std::string rep = ck_path.parent_path().filename().string();
    const std::string split = ck_path.parent_path().parent_path().filename().string();
    const PreparedInput* in = nullptr;
    for (const auto& candidate : inputs) {
      if (candidate.label == split) in = &candidate;
    }
    if (!in) {
      if (inputs.size() != 1) {
        throw DataError("cannot tell which unseen case " + ck_path.string() + " belongs to");
      }
      in = &inputs.front();
    }
    const Checkpoint ck = load_checkpoint(ck_path.string());
    if (ck.model.appliance_count != in->appliance_names.size()) {
      throw DataError(ck_path.string() + " predicts " + std::to_string(ck.model.appliance_count) +
                      " appliances, the dataset labels " + std::to_string(in->appliance_names.size()));
    }
    if (ck.mean_w != in->mean_w) {
      logger().warn("{} was trained with mean {} W, the dataset uses {} W", ck_path.string(), ck.mean_w, in->mean_w);
    }
    const auto windows = pooled(*in, cfg.eval_split);
    if (windows.empty()) throw DataError("the " + cfg.eval_split + " split of " + in->dir.string() + " is empty");
    NilmModel<float> model(ck.model);
    model.load_params(ck.params);
    const auto counts = evaluate_windows(model, windows);
    for (std::size_t a = 0; a < counts.size(); ++a) {
      rows.push_back({in->appliance_names[a], rep, in->label, counts[a], scores(counts[a])});
    }
    cases_seen.insert(in->label);
  }
  const std::string report = format_score_report(rows);
  if (!cfg.out_dir.empty()) write_text(make_out_dir(cfg) / "evaluation.csv", report);
  std::cout << report;
  if (inputs.size() > 1 && cases_seen.size() != inputs.size()) {
    logger().warn("evaluated {} of {} unseen cases", cases_seen.size(), inputs.size());
  }
}

}  // namespace fednilm::cli
