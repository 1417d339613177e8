#include "run_config.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <fmt/format.h>
#include <functional>
#include <limits>
#include <map>

#include "fednilm/error.hpp"

namespace fednilm::cli {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::uint64_t parse_uint(const std::string& key, const std::string& v,
                         std::uint64_t max = std::numeric_limits<std::uint64_t>::max()) {
  const std::string t = trim(v);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc{} || p != t.data() + t.size() || out > max) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  double out = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc{} || p != t.data() + t.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a finite number, got '" + v + "'");
  }
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const std::string item = trim(v.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::uint64_t> parse_uint_list(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(v)) out.push_back(parse_uint(key, item));
  return out;
}

template <typename C>
std::string join(const C& items) {
  std::string out;
  for (const auto& x : items) {
    if (!out.empty()) out += ',';
    out += fmt::format("{}", x);
  }
  return out;
}

struct Field {
  SchemaField info;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <std::size_t N>
void set_array(const std::string& key, const std::string& v, std::array<std::size_t, N>& dst) {
  const auto xs = parse_uint_list(key, v);
  if (xs.size() != N) throw ConfigError(key + ": expected " + std::to_string(N) + " integers");
  for (std::size_t i = 0; i < N; ++i) dst[i] = xs[i];
}

const std::vector<Field>& fields() {
  using C = RunConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto uint_field = [&](std::string key, std::string doc, auto member) {
      f.push_back({{key, "uint", std::move(doc)},
                   [key, member](C& c, const std::string& v) { member(c) = parse_uint(key, v); },
                   [member](const C& c) { return std::to_string(member(const_cast<C&>(c))); }});
    };
    auto real_field = [&](std::string key, std::string doc, auto member) {
      f.push_back({{key, "real", std::move(doc)},
                   [key, member](C& c, const std::string& v) {
                     member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_real(key, v));
                   },
                   [member](const C& c) { return fmt::format("{}", member(const_cast<C&>(c))); }});
    };
    auto string_field = [&](std::string key, std::string doc, auto member) {
      f.push_back({{key, "string", std::move(doc)},
                   [member](C& c, const std::string& v) { member(c) = trim(v); },
                   [member](const C& c) { return member(const_cast<C&>(c)); }});
    };

    string_field("data.raw_dir", "raw directory: house_<n>/<channel>.dat plus manifest.json",
                 [](C& c) -> std::string& { return c.raw_dir; });
    string_field("data.dataset_dir", "preprocessed directory written by 'preprocess'",
                 [](C& c) -> std::string& { return c.dataset_dir; });
    f.push_back({{"data.split", "seen|unseen", "seen: 80/10/10 in time per household; unseen: one household held out"},
                 [](C& c, const std::string& v) {
                   try {
                     c.split = parse_split_mode(trim(v));
                   } catch (const Error& e) {
                     throw ConfigError(std::string("data.split: ") + e.what());
                   }
                 },
                 [](const C& c) { return to_string(c.split); }});
    uint_field("data.unseen_case", "held-out household position (1-based); 0 runs every case",
               [](C& c) -> std::size_t& { return c.unseen_case; });
    f.push_back({{"data.appliances", "list", "target appliances, in label order"},
                 [](C& c, const std::string& v) {
                   auto xs = split_list(v);
                   if (xs.empty()) throw ConfigError("data.appliances: at least one appliance is required");
                   c.appliances = std::move(xs);
                 },
                 [](const C& c) { return join(c.appliances); }});
    uint_field("data.train_stride", "training window stride in 6 s steps",
               [](C& c) -> std::size_t& { return c.train_stride; });
    uint_field("data.eval_stride", "validation/test window stride in 6 s steps",
               [](C& c) -> std::size_t& { return c.eval_stride; });

    uint_field("model.window_len", "input window length in 6 s steps",
               [](C& c) -> std::size_t& { return c.federation.model.window_len; });
    f.push_back({{"model.encoder_channels", "list", "channels of the three encoder convolutions"},
                 [](C& c, const std::string& v) { set_array("model.encoder_channels", v, c.federation.model.encoder_channels); },
                 [](const C& c) { return join(c.federation.model.encoder_channels); }});
    f.push_back({{"model.downsample_factors", "list", "average-pool factors after encoder stages 1 and 2"},
                 [](C& c, const std::string& v) {
                   set_array("model.downsample_factors", v, c.federation.model.downsample_factors);
                 },
                 [](const C& c) { return join(c.federation.model.downsample_factors); }});
    uint_field("model.pool_branches", "temporal-pooling branches",
               [](C& c) -> std::size_t& { return c.federation.model.pool_branch_count; });
    uint_field("model.branch_channels", "channels per pooling branch",
               [](C& c) -> std::size_t& { return c.federation.model.branch_channels; });
    uint_field("model.decoder_channels", "channels of the decoder convolution",
               [](C& c) -> std::size_t& { return c.federation.model.decoder_channels; });
    real_field("model.dropout", "dropout probability before the decoder",
               [](C& c) -> double& { return c.federation.model.dropout_p; });

    uint_field("federation.clients", "N; 0 means one client per training household",
               [](C& c) -> std::size_t& { return c.federation.clients; });
    uint_field("federation.global_rounds", "R_G", [](C& c) -> std::size_t& { return c.federation.global_rounds; });
    uint_field("federation.local_epochs", "R_L", [](C& c) -> std::size_t& { return c.federation.local_epochs; });
    uint_field("federation.local_batch", "B_L", [](C& c) -> std::size_t& { return c.federation.local_batch; });
    uint_field("federation.global_batch", "B_G, capacity of the server's update buffer",
               [](C& c) -> std::size_t& { return c.federation.global_batch; });
    real_field("federation.eta", "learning rate", [](C& c) -> float& { return c.federation.eta; });
    real_field("federation.rho", "momentum", [](C& c) -> float& { return c.federation.rho; });
    uint_field("federation.global_seed", "seeds the initial model; client n defaults to global_seed + 1 + n",
               [](C& c) -> std::uint64_t& { return c.federation.global_seed; });
    f.push_back({{"federation.client_seeds", "list", "explicit per-client seeds (empty: derived)"},
                 [](C& c, const std::string& v) { c.federation.client_seeds = parse_uint_list("federation.client_seeds", v); },
                 [](const C& c) { return join(c.federation.client_seeds); }});
    uint_field("federation.threads", "worker threads for in-process clients; 0 means one per client",
               [](C& c) -> std::size_t& { return c.federation.threads; });

    uint_field("central.epochs", "epochs of the centralized baseline", [](C& c) -> std::size_t& { return c.central_epochs; });

    string_field("run.out_dir", "output directory", [](C& c) -> std::string& { return c.out_dir; });
    string_field("run.model", "checkpoint file, or a training output directory", [](C& c) -> std::string& { return c.model_path; });
    f.push_back({{"run.eval_split", "train|validation|test", "portion scored by 'evaluate'"},
                 [](C& c, const std::string& v) {
                   const std::string s = trim(v);
                   if (s != "train" && s != "validation" && s != "test") {
                     throw ConfigError("run.eval_split: expected train, validation or test, got '" + v + "'");
                   }
                   c.eval_split = s;
                 },
                 [](const C& c) { return c.eval_split; }});
    uint_field("run.repetitions", "independent repetitions; repetition r shifts every seed by r - 1",
               [](C& c) -> std::size_t& { return c.repetitions; });
    f.push_back({{"run.round_grid", "list", "rounds (or epochs) at which the test split is scored, e.g. 2,4,6,8,10"},
                 [](C& c, const std::string& v) {
                   c.round_grid.clear();
                   for (auto x : parse_uint_list("run.round_grid", v)) {
                     if (x == 0) throw ConfigError("run.round_grid: rounds are 1-based");
                     c.round_grid.push_back(x);
                   }
                 },
                 [](const C& c) { return join(c.round_grid); }});

    string_field("net.host", "server address", [](C& c) -> std::string& { return c.host; });
    f.push_back({{"net.port", "uint", "server port (0: ephemeral)"},
                 [](C& c, const std::string& v) { c.port = static_cast<std::uint16_t>(parse_uint("net.port", v, 65535)); },
                 [](const C& c) { return std::to_string(c.port); }});
    f.push_back({{"net.client_id", "uint", "client index used by 'join'; selects the household at that position"},
                 [](C& c, const std::string& v) {
                   c.client_id = static_cast<std::uint32_t>(parse_uint("net.client_id", v, 0xffffffffu));
                 },
                 [](const C& c) { return std::to_string(c.client_id); }});
    real_field("net.registration_timeout_s", "seconds the server waits for all N clients",
               [](C& c) -> double& { return c.registration_timeout_s; });

    uint_field("synth.seed", "generator seed", [](C& c) -> std::uint64_t& { return c.synth.seed; });
    uint_field("synth.households", "households to generate", [](C& c) -> std::size_t& { return c.synth.households; });
    real_field("synth.days", "simulated days per household", [](C& c) -> double& { return c.synth.days; });
    real_field("synth.noise_sigma", "aggregate noise standard deviation in watts",
               [](C& c) -> double& { return c.synth.noise_sigma_w; });
    real_field("synth.start_time", "first timestamp, unix seconds", [](C& c) -> double& { return c.synth.start_time; });
    return f;
  }();
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.info.key == key) return f;
  }
  throw ConfigError("unknown configuration key '" + key + "' (see 'fednilm schema')");
}

}  // namespace

PreprocessOptions RunConfig::preprocess_options() const {
  PreprocessOptions o;
  o.window_len = federation.model.window_len;
  o.train_stride = train_stride;
  o.eval_stride = eval_stride;
  o.mode = split;
  o.unseen_case = unseen_case;
  return o;
}

FederationConfig RunConfig::federation_for(std::size_t clients, std::size_t rep) const {
  FederationConfig f = federation;
  f.clients = clients;
  f.model.appliance_count = appliances.size();
  const std::uint64_t shift = rep - 1;
  f.global_seed += shift;
  for (auto& s : f.client_seeds) s += shift;
  f.validate();
  return f;
}

const std::vector<SchemaField>& schema() {
  static const std::vector<SchemaField> out = [] {
    std::vector<SchemaField> s;
    for (const auto& f : fields()) s.push_back(f.info);
    return s;
  }();
  return out;
}

std::string format_schema() {
  const RunConfig defaults;
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.info.key.find('.');
    const std::string sec = f.info.key.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "" : "\n") + ("[" + sec + "]\n");
      section = sec;
    }
    out += fmt::format("# {} ({})\n{} = {}\n", f.info.doc, f.info.type, f.info.key.substr(dot + 1),
                       f.get(defaults));
  }
  return out;
}

void set_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, value);
}

std::string get_value(const RunConfig& cfg, const std::string& key) { return field(key).get(cfg); }

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::Error& e) {
    throw ConfigError("cannot read config " + path + ": " + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (item.parents.size() != 1) {
      throw ConfigError(path + ": key '" + item.fullname() + "' must sit inside exactly one [section]");
    }
    std::string value;
    for (const auto& in : item.inputs) value += (value.empty() ? "" : ",") + in;
    set_value(cfg, item.fullname(), value);
  }
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  set_value(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

}  // namespace fednilm::cli
