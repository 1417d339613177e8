#include "fednilm/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "fednilm/bytes.hpp"
#include "fednilm/error.hpp"
#include "fednilm/log.hpp"

namespace fednilm {

void FederationConfig::validate() const {
  if (clients == 0) throw ConfigError("federation needs at least one client");
  if (local_batch == 0) throw ConfigError("local batch size B_L must be positive");
  if (global_batch == 0) throw ConfigError("global sharing batch B_G must be positive");
  if (clients > global_batch) {
    throw ConfigError("N = " + std::to_string(clients) + " clients exceed the global sharing batch B_G = " +
                      std::to_string(global_batch));
  }
  if (!(eta >= 0.0f) || !std::isfinite(eta)) throw ConfigError("eta must be finite and non-negative");
  if (!(rho >= 0.0f && rho < 1.0f)) throw ConfigError("rho must lie in [0, 1)");
  if (!client_seeds.empty() && client_seeds.size() != clients) {
    throw ConfigError("client_seeds lists " + std::to_string(client_seeds.size()) + " seeds for " +
                      std::to_string(clients) + " clients");
  }
  model.validate();
}

std::uint64_t FederationConfig::client_seed(std::size_t n) const {
  return client_seeds.empty() ? global_seed + 1 + n : client_seeds.at(n);
}

ModelConfig FederationConfig::initial_model() const {
  ModelConfig m = model;
  m.init_seed = global_seed;
  return m;
}

std::uint64_t FederationConfig::hash() const {
  std::vector<std::uint8_t> b;
  for (std::uint64_t v : {std::uint64_t{clients}, std::uint64_t{global_rounds},
                          std::uint64_t{local_epochs}, std::uint64_t{local_batch},
                          std::uint64_t{global_batch}, global_seed}) {
    bytes::put_le(b, v);
  }
  bytes::put_f32(b, eta);
  bytes::put_f32(b, rho);
  for (std::size_t n = 0; n < clients; ++n) bytes::put_le(b, client_seed(n));
  for (std::uint64_t v : {std::uint64_t{model.window_len}, std::uint64_t{model.appliance_count},
                          std::uint64_t{model.pool_branch_count}, std::uint64_t{model.branch_channels},
                          std::uint64_t{model.decoder_channels}}) {
    bytes::put_le(b, v);
  }
  for (std::size_t c : model.encoder_channels) bytes::put_le(b, std::uint64_t{c});
  for (std::size_t f : model.downsample_factors) bytes::put_le(b, std::uint64_t{f});
  bytes::put_f64(b, model.dropout_p);
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t c : b) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void assemble_batch(std::span<const WindowSample> data, std::span<const std::size_t> indices,
                    std::size_t appliances, Tensor<float>& input, Tensor<float>& labels) {
  if (indices.empty()) throw ParameterError("empty batch");
  const std::size_t len = data[indices[0]].aggregate.size();
  if (input.batch() != indices.size() || input.length() != len) {
    input = Tensor<float>(indices.size(), 1, len);
  }
  if (labels.batch() != indices.size() || labels.channels() != appliances || labels.length() != len) {
    labels = Tensor<float>(indices.size(), appliances, len);
  }
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const WindowSample& w = data[indices[b]];
    if (w.aggregate.size() != len || w.labels.size() != appliances * len) {
      throw DimensionError("length", "window " + std::to_string(indices[b]) +
                                         " does not match the batch geometry");
    }
    std::copy(w.aggregate.begin(), w.aggregate.end(), input.row(b, 0).begin());
    for (std::size_t a = 0; a < appliances; ++a) {
      auto dst = labels.row(b, a);
      for (std::size_t l = 0; l < len; ++l) dst[l] = static_cast<float>(w.labels[a * len + l]);
    }
  }
}

ClientState::ClientState(const FederationConfig& config, std::uint32_t id,
                         std::shared_ptr<const std::vector<WindowSample>> windows)
    : client_id(id),
      data(std::move(windows)),
      model(config.initial_model()),
      optimizer(model.param_count(), config.eta, config.rho),
      rng(config.client_seed(id)) {}

LocalUpdate households_update(ClientState& client, const ParamVector<float>& global,
                              const FederationConfig& config, std::size_t epochs) {
  client.model.load_params(global);
  LocalUpdate out;
  out.client_id = client.client_id;
  if (!client.data || client.data->empty()) {
    throw DataError("client " + std::to_string(client.client_id) + " has no training windows");
  }
  const auto& data = *client.data;
  const std::size_t apps = client.model.config().appliance_count;
  std::vector<std::size_t> order(data.size());
  Tensor<float> input(1, 1, 1), labels(1, 1, 1);
  double loss_sum = 0.0;
  client.model.set_training(true);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), client.rng);
    for (std::size_t start = 0; start < order.size(); start += config.local_batch) {
      const std::size_t n = std::min(config.local_batch, order.size() - start);
      assemble_batch(data, std::span<const std::size_t>(order).subspan(start, n), apps, input, labels);
      client.model.zero_grad();
      const float loss = client.model.loss_and_grad(input, labels, &client.rng);
      if (!std::isfinite(loss)) {
        throw NumericError("client " + std::to_string(client.client_id) + ": non-finite loss in epoch " +
                           std::to_string(epoch + 1));
      }
      sgd_momentum_step<float>(client.model.params(), client.model.grads(), client.optimizer);
      loss_sum += loss;
      ++out.batches;
    }
  }
  client.model.set_training(false);
  out.params = client.model.flatten_params();
  out.mean_loss = out.batches ? static_cast<float>(loss_sum / static_cast<double>(out.batches)) : 0.0f;
  return out;
}

ParamVector<float> fedavg(std::span<const ParamVector<float>> updates) {
  if (updates.empty()) throw ValidationError("fedavg needs at least one update");
  const auto& layout = updates.front().layout;
  if (!layout) throw StructuralError("update has no layout");
  for (const auto& u : updates) {
    if (!u.layout) throw StructuralError("update has no layout");
    layout->require_equal(*u.layout);
    if (u.values.size() != layout->total_size()) {
      throw StructuralError("update length " + std::to_string(u.values.size()) +
                            " differs from its layout size " + std::to_string(layout->total_size()));
    }
  }
  std::vector<double> sum(layout->total_size(), 0.0);
  for (const auto& u : updates) {
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += static_cast<double>(u.values[i]);
  }
  ParamVector<float> out{layout, std::vector<float>(sum.size())};
  const double n = static_cast<double>(updates.size());
  for (std::size_t i = 0; i < sum.size(); ++i) out.values[i] = static_cast<float>(sum[i] / n);
  return out;
}

ParamVector<float> fedavg(std::span<const LocalUpdate> updates) {
  std::vector<const LocalUpdate*> sorted;
  for (const auto& u : updates) sorted.push_back(&u);
  std::sort(sorted.begin(), sorted.end(),
            [](const LocalUpdate* a, const LocalUpdate* b) { return a->client_id < b->client_id; });
  std::vector<ParamVector<float>> ordered;
  ordered.reserve(sorted.size());
  for (const LocalUpdate* u : sorted) ordered.push_back(u->params);
  return fedavg(std::span<const ParamVector<float>>(ordered));
}

std::vector<ConfusionCounts> evaluate_windows(NilmModel<float>& model,
                                              std::span<const WindowSample> windows,
                                              std::size_t batch) {
  const std::size_t apps = model.config().appliance_count;
  std::vector<ConfusionCounts> counts(apps);
  if (windows.empty()) return counts;
  Tensor<float> input(1, 1, 1), labels(1, 1, 1);
  std::vector<std::size_t> idx;
  std::vector<std::uint8_t> pred, truth;
  for (std::size_t start = 0; start < windows.size(); start += batch) {
    const std::size_t n = std::min(batch, windows.size() - start);
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), start);
    assemble_batch(windows, idx, apps, input, labels);
    const Tensor<float> states = model.predict_states(input);
    const std::size_t len = states.length();
    pred.resize(len);
    truth.resize(len);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t a = 0; a < apps; ++a) {
        const auto p = states.row(b, a);
        const auto t = labels.row(b, a);
        for (std::size_t l = 0; l < len; ++l) {
          pred[l] = p[l] > 0.5f ? 1 : 0;
          truth[l] = t[l] > 0.5f ? 1 : 0;
        }
        counts[a] += confusion(pred, truth);
      }
    }
  }
  return counts;
}

std::vector<ScoreSet> score_windows(NilmModel<float>& model, std::span<const WindowSample> windows,
                                    std::size_t batch) {
  std::vector<ScoreSet> out;
  for (const auto& c : evaluate_windows(model, windows, batch)) out.push_back(scores(c));
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

void attach_validation(RoundReport& report, NilmModel<float>& evaluator,
                       const ParamVector<float>& params, const TrainingOptions& options) {
  if (options.validation.empty()) return;
  evaluator.load_params(params);
  report.validation = score_windows(evaluator, options.validation);
}

}  // namespace

TrainingResult run_federated(const FederationConfig& config,
                             std::span<const std::vector<WindowSample>> datasets,
                             const TrainingOptions& options) {
  config.validate();
  if (datasets.size() != config.clients) {
    throw ConfigError("got " + std::to_string(datasets.size()) + " client datasets for N = " +
                      std::to_string(config.clients));
  }
  std::vector<ClientState> clients;
  clients.reserve(config.clients);
  for (std::size_t n = 0; n < config.clients; ++n) {
    clients.emplace_back(config, static_cast<std::uint32_t>(n),
                         std::make_shared<const std::vector<WindowSample>>(datasets[n]));
  }
  NilmModel<float> evaluator(config.initial_model());
  TrainingResult result{evaluator.flatten_params(), {}};
  const std::size_t workers = config.threads == 0 ? config.clients : config.threads;
  const auto start = Clock::now();

  for (std::size_t round = 1; round <= config.global_rounds; ++round) {
    RoundReport report;
    report.round = round;
    const auto round_start = Clock::now();
    std::vector<std::optional<LocalUpdate>> updates(config.clients);
    std::vector<std::string> failures(config.clients);
    std::vector<std::exception_ptr> fatal(config.clients);
    auto work = [&](std::size_t n) {
      try {
        updates[n] = households_update(clients[n], result.params, config);
      } catch (const DataError& e) {
        failures[n] = e.what();
      } catch (...) {
        fatal[n] = std::current_exception();
      }
    };
    for (std::size_t first = 0; first < config.clients; first += workers) {
      const std::size_t last = std::min(config.clients, first + workers);
      if (last - first == 1) {
        work(first);
        continue;
      }
      std::vector<std::thread> pool;
      for (std::size_t n = first; n < last; ++n) pool.emplace_back(work, n);
      for (auto& t : pool) t.join();
    }
    for (const auto& e : fatal) {
      if (e) std::rethrow_exception(e);
    }
    report.train_seconds = seconds_since(round_start);

    std::vector<LocalUpdate> accepted;
    for (std::size_t n = 0; n < config.clients; ++n) {
      ClientRoundStat stat;
      stat.client_id = static_cast<std::uint32_t>(n);
      if (updates[n]) {
        stat.loss = updates[n]->mean_loss;
        stat.batches = updates[n]->batches;
        accepted.push_back(std::move(*updates[n]));
      } else {
        stat.excluded = true;
        stat.note = failures[n];
        logger().warn("round {}: client {} excluded: {}", round, n, failures[n]);
      }
      report.clients.push_back(std::move(stat));
    }
    if (accepted.empty()) throw DataError("round " + std::to_string(round) + ": every client failed");
    const auto agg_start = Clock::now();
    result.params = fedavg(std::span<const LocalUpdate>(accepted));
    report.aggregation_seconds = seconds_since(agg_start);
    report.elapsed_seconds = seconds_since(start);
    attach_validation(report, evaluator, result.params, options);
    logger().info("round {}/{} done in {:.2f}s", round, config.global_rounds,
                  report.train_seconds + report.aggregation_seconds);
    if (options.on_round) options.on_round(report, result.params);
    result.rounds.push_back(std::move(report));
  }
  return result;
}

TrainingResult run_centralized(const FederationConfig& config, std::vector<WindowSample> pooled,
                               std::size_t epochs, const TrainingOptions& options) {
  config.validate();
  ClientState client(config, 0, std::make_shared<const std::vector<WindowSample>>(std::move(pooled)));
  NilmModel<float> evaluator(config.initial_model());
  TrainingResult result{evaluator.flatten_params(), {}};
  const auto start = Clock::now();
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    RoundReport report;
    report.round = epoch;
    const auto epoch_start = Clock::now();
    LocalUpdate u = households_update(client, result.params, config, 1);
    report.train_seconds = seconds_since(epoch_start);
    report.clients.push_back({0, u.mean_loss, u.batches, 0, 0, false, {}});
    result.params = std::move(u.params);
    report.elapsed_seconds = seconds_since(start);
    attach_validation(report, evaluator, result.params, options);
    if (options.on_round) options.on_round(report, result.params);
    result.rounds.push_back(std::move(report));
  }
  return result;
}

}  // namespace fednilm
